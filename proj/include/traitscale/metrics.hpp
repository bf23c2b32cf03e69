#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "traitscale/pft.hpp"

namespace traitscale {

/// Bias / precision / goodness-of-fit triple. `r` is empty when either
/// vector has zero variance (correlation undefined).
struct RegressionMetrics {
  double me = 0.0;
  double rmse = 0.0;
  std::optional<double> r;
};

/// me = mean(pred - obs), rmse = sqrt(mean((pred - obs)^2)),
/// r = Pearson correlation. Lengths must match and be >= 2.
RegressionMetrics compute_metrics(std::span<const double> predicted,
                                  std::span<const double> observed);

struct ConfusionMatrix {
  /// counts[reference][predicted], indexed by pft_index.
  std::array<std::array<int64_t, kNumPft>, kNumPft> counts{};

  int64_t total() const;
  int64_t diagonal() const;
  int64_t row_total(int i) const;
  int64_t col_total(int j) const;
};

struct ClassificationScores {
  ConfusionMatrix matrix;
  double overall_accuracy = 0.0;
  /// Empty when expected chance agreement is 1 (kappa undefined).
  std::optional<double> kappa;
};

ClassificationScores confusion_and_kappa(std::span<const PftClass> reference,
                                         std::span<const PftClass> predicted);

/// Computes scores from a prefilled count table (e.g. an external
/// confusion matrix).
ClassificationScores scores_from_matrix(const ConfusionMatrix& matrix);

/// Linear-interpolation quantile (the numpy default). q in [0, 1].
double quantile(std::vector<double> values, double q);

}  // namespace traitscale
