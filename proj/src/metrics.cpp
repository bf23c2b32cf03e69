#include "traitscale/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "traitscale/error.hpp"

namespace traitscale {

RegressionMetrics compute_metrics(std::span<const double> predicted,
                                  std::span<const double> observed) {
  if (predicted.size() != observed.size())
    throw Error("compute_metrics: length mismatch");
  const size_t n = predicted.size();
  if (n < 2) throw Error("compute_metrics: need at least 2 samples");

  double sum_err = 0.0, sum_sq = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (!std::isfinite(predicted[i]) || !std::isfinite(observed[i]))
      throw Error("compute_metrics: non-finite value");
    const double e = predicted[i] - observed[i];
    sum_err += e;
    sum_sq += e * e;
  }

  RegressionMetrics m;
  m.me = sum_err / static_cast<double>(n);
  m.rmse = std::sqrt(sum_sq / static_cast<double>(n));

  double mean_p = 0.0, mean_o = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mean_p += predicted[i];
    mean_o += observed[i];
  }
  mean_p /= static_cast<double>(n);
  mean_o /= static_cast<double>(n);
  double spp = 0.0, soo = 0.0, spo = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dp = predicted[i] - mean_p;
    const double dobs = observed[i] - mean_o;
    spp += dp * dp;
    soo += dobs * dobs;
    spo += dp * dobs;
  }
  if (spp > 0.0 && soo > 0.0) m.r = spo / std::sqrt(spp * soo);
  return m;
}

int64_t ConfusionMatrix::total() const {
  int64_t t = 0;
  for (const auto& row : counts)
    for (int64_t c : row) t += c;
  return t;
}

int64_t ConfusionMatrix::diagonal() const {
  int64_t t = 0;
  for (int i = 0; i < kNumPft; ++i) t += counts[i][i];
  return t;
}

int64_t ConfusionMatrix::row_total(int i) const {
  int64_t t = 0;
  for (int64_t c : counts[i]) t += c;
  return t;
}

int64_t ConfusionMatrix::col_total(int j) const {
  int64_t t = 0;
  for (int i = 0; i < kNumPft; ++i) t += counts[i][j];
  return t;
}

ClassificationScores scores_from_matrix(const ConfusionMatrix& matrix) {
  const int64_t total = matrix.total();
  if (total <= 0) throw Error("confusion matrix is empty");

  ClassificationScores s;
  s.matrix = matrix;
  const double tot = static_cast<double>(total);
  s.overall_accuracy = static_cast<double>(matrix.diagonal()) / tot;

  double expected = 0.0;
  for (int i = 0; i < kNumPft; ++i)
    expected += static_cast<double>(matrix.row_total(i)) *
                static_cast<double>(matrix.col_total(i)) / (tot * tot);
  if (expected < 1.0)
    s.kappa = (s.overall_accuracy - expected) / (1.0 - expected);
  return s;
}

ClassificationScores confusion_and_kappa(std::span<const PftClass> reference,
                                         std::span<const PftClass> predicted) {
  if (reference.size() != predicted.size())
    throw Error("confusion_and_kappa: length mismatch");
  if (reference.empty()) throw Error("confusion_and_kappa: empty input");
  ConfusionMatrix m;
  for (size_t i = 0; i < reference.size(); ++i)
    ++m.counts[pft_index(reference[i])][pft_index(predicted[i])];
  return scores_from_matrix(m);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error("quantile: empty input");
  q = std::clamp(q, 0.0, 1.0);
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

}  // namespace traitscale
