#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "traitscale/forest.hpp"
#include "traitscale/metrics.hpp"
#include "traitscale/pft.hpp"
#include "traitscale/regress.hpp"

namespace traitscale {

enum class Method { RLR, RF, ELM, KRR, GPR };

inline constexpr std::array<Method, 5> kAllMethods = {Method::RLR, Method::RF, Method::ELM,
                                                      Method::KRR, Method::GPR};

std::string_view method_name(Method m);
std::optional<Method> method_from_name(std::string_view name);

struct TrainedTraitModel;

/// Uniform fit/predict interface over the five regression methods; each
/// implementation owns its hyperparameter selection (inner CV or, for
/// GPR, marginal likelihood).
class TraitRegressor {
 public:
  virtual ~TraitRegressor() = default;
  virtual void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, uint64_t seed) = 0;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& X) const = 0;
  virtual std::string hyper_desc() const = 0;
  /// Per-tree prediction std for RF, posterior std for GPR, 0 otherwise.
  virtual Eigen::VectorXd predict_std(const Eigen::MatrixXd& X) const;
  /// Copies the fitted model into a persistable container.
  virtual void export_model(TrainedTraitModel& out) const = 0;
};

/// `production` keeps surrogate splits in RF models so deployed trait
/// maps tolerate missing features; evaluation runs skip them (inputs
/// are complete).
std::unique_ptr<TraitRegressor> make_regressor(Method method, int inner_folds = 5,
                                               bool production = false);

struct EvalProtocol {
  double cv_fraction = 0.8;
  int realizations = 20;
  uint64_t seed = 0;
  int inner_folds = 5;
  int n_threads = 0;
  /// Stable per-row keys; splits are keyed on (id, seed, realization) so
  /// shuffling rows cannot change the report. Default: row index.
  std::vector<std::string> sample_ids;
};

struct RealizationResult {
  double me = 0.0;
  double rmse = 0.0;
  std::optional<double> r;
  std::string hyper;
};

struct EvalReport {
  Method method = Method::RF;
  std::string target_name;
  size_t n = 0;
  size_t n_test = 0;
  std::vector<RealizationResult> realizations;
  double me_mean = 0.0;
  double rmse_mean = 0.0;
  double r_mean = 0.0;
  double r_std = 0.0;
  /// Held-out pairs from the first realization (scatter plot data) and
  /// their original row indices.
  std::vector<double> scatter_pred, scatter_obs;
  std::vector<size_t> scatter_rows;
};

/// Appendix-B protocol: per realization an 80/20 split (keyed on sample
/// ids), hyperparameters selected within the 80%, metrics on the 20%;
/// features are standardized with training-rows statistics.
EvalReport evaluate_method(Method method, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const EvalProtocol& protocol);

struct RobustnessPoint {
  double fraction = 0.0;
  double r_mean = 0.0;
  double r_std = 0.0;
  double rmse_mean = 0.0;
};

/// Re-runs the protocol with the training set restricted to each given
/// fraction of the data (test split fixed at the protocol's held-out
/// share).
std::vector<RobustnessPoint> robustness_curve(Method method, const Eigen::MatrixXd& X,
                                              const Eigen::VectorXd& y,
                                              const std::vector<double>& fractions,
                                              const EvalProtocol& protocol);

struct PftResidualStats {
  double me = 0.0;
  double rmse = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  size_t n = 0;
};

/// Residuals (prediction - observation) grouped by dominant PFT.
std::map<PftClass, PftResidualStats> residuals_by_pft(std::span<const double> predictions,
                                                      std::span<const double> observations,
                                                      std::span<const PftClass> dominant);

struct LatitudeBin {
  double lat_lo = 0.0;
  double lat_hi = 0.0;
  double mean = 0.0;
  size_t count = 0;
};

/// Mean value and pixel count per latitude bin (non-empty bins only,
/// ascending latitude).
std::vector<LatitudeBin> latitudinal_profile(std::span<const double> values,
                                             std::span<const double> lats, double bin_deg = 1.0);

}  // namespace traitscale
