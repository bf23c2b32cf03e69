#include "traitscale/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "traitscale/error.hpp"
#include "traitscale/model_io.hpp"
#include "traitscale/parallel.hpp"
#include "traitscale/raster_features.hpp"
#include "traitscale/rng.hpp"

namespace traitscale {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::RLR: return "rlr";
    case Method::RF: return "rf";
    case Method::ELM: return "elm";
    case Method::KRR: return "krr";
    case Method::GPR: return "gpr";
  }
  return "?";
}

std::optional<Method> method_from_name(std::string_view name) {
  for (Method m : kAllMethods)
    if (method_name(m) == name) return m;
  return std::nullopt;
}

Eigen::VectorXd TraitRegressor::predict_std(const Eigen::MatrixXd& X) const {
  return Eigen::VectorXd::Zero(X.rows());
}

namespace {

/// k-fold RMSE of a fit/predict pair over canonical row order.
template <typename FitFn>
double inner_cv_rmse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int folds,
                     const FitFn& fit_predict) {
  const Eigen::Index n = X.rows();
  const int k = std::max(2, std::min<int>(folds, static_cast<int>(n / 2)));
  double sq = 0.0;
  size_t count = 0;
  for (int fold = 0; fold < k; ++fold) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i)
      ((i % k) == fold ? test : train).push_back(i);
    if (train.size() < 2 || test.empty()) continue;
    Eigen::MatrixXd Xtr(train.size(), X.cols()), Xte(test.size(), X.cols());
    Eigen::VectorXd ytr(train.size());
    for (size_t i = 0; i < train.size(); ++i) {
      Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train[i]);
      ytr[static_cast<Eigen::Index>(i)] = y[train[i]];
    }
    for (size_t i = 0; i < test.size(); ++i)
      Xte.row(static_cast<Eigen::Index>(i)) = X.row(test[i]);
    const Eigen::VectorXd pred = fit_predict(Xtr, ytr, Xte);
    for (size_t i = 0; i < test.size(); ++i) {
      const double e = pred[static_cast<Eigen::Index>(i)] - y[test[i]];
      sq += e * e;
      ++count;
    }
  }
  if (count == 0) throw Error("inner CV produced no scores");
  return std::sqrt(sq / static_cast<double>(count));
}

class RlrRegressor final : public TraitRegressor {
 public:
  explicit RlrRegressor(int folds) : folds_(folds) {}
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, uint64_t) override {
    const std::vector<double> grid = {1e-6, 1e-4, 1e-2, 1e-1, 1.0, 10.0, 100.0};
    double best = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
      const double rmse = inner_cv_rmse(
          X, y, folds_, [lambda](const auto& Xtr, const auto& ytr, const auto& Xte) {
            return traitscale::predict(fit_rlr(Xtr, ytr, lambda), Xte);
          });
      if (rmse < best) {
        best = rmse;
        lambda_ = lambda;
      }
    }
    model_ = fit_rlr(X, y, lambda_);
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return traitscale::predict(model_, X);
  }
  std::string hyper_desc() const override { return "lambda=" + std::to_string(lambda_); }
  void export_model(TrainedTraitModel& out) const override { out.linear = model_; }

 private:
  int folds_;
  double lambda_ = 1.0;
  LinearModel model_;
};

class ElmRegressor final : public TraitRegressor {
 public:
  explicit ElmRegressor(int folds) : folds_(folds) {}
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, uint64_t seed) override {
    const std::vector<int> hidden_grid = {50, 100};
    const std::vector<double> lambda_grid = {1e-6, 1e-3, 1e-1};
    double best = std::numeric_limits<double>::infinity();
    for (int h : hidden_grid) {
      for (double lambda : lambda_grid) {
        const double rmse = inner_cv_rmse(
            X, y, folds_, [&](const auto& Xtr, const auto& ytr, const auto& Xte) {
              return traitscale::predict(fit_elm(Xtr, ytr, h, lambda, seed), Xte);
            });
        if (rmse < best) {
          best = rmse;
          hidden_ = h;
          lambda_ = lambda;
        }
      }
    }
    model_ = fit_elm(X, y, hidden_, lambda_, seed);
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return traitscale::predict(model_, X);
  }
  std::string hyper_desc() const override {
    return "hidden=" + std::to_string(hidden_) + " lambda=" + std::to_string(lambda_);
  }
  void export_model(TrainedTraitModel& out) const override { out.elm = model_; }

 private:
  int folds_;
  int hidden_ = 100;
  double lambda_ = 1e-3;
  ElmModel model_;
};

class KrrRegressor final : public TraitRegressor {
 public:
  explicit KrrRegressor(int folds) : folds_(folds) {}
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, uint64_t seed) override {
    KrrGrid grid;
    grid.folds = folds_;
    model_ = fit_krr_cv(X, y, grid, seed);
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return kernel_predict(model_, X);
  }
  std::string hyper_desc() const override {
    return "sigma=" + std::to_string(model_.theta.sigma_f.size() ? model_.theta.sigma_f[0] : 0.0) +
           " sigma_n=" + std::to_string(model_.theta.sigma_n);
  }
  void export_model(TrainedTraitModel& out) const override { out.kernel = model_; }

 private:
  int folds_;
  KernelModel model_;
};

class GprRegressor final : public TraitRegressor {
 public:
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, uint64_t seed) override {
    GprOptions options;
    options.seed = seed;
    options.restarts = 2;
    model_ = fit_gpr(X, y, options);
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return kernel_predict(model_, X);
  }
  Eigen::VectorXd predict_std(const Eigen::MatrixXd& X) const override {
    return gpr_predictive_variance(model_, X).array().sqrt();
  }
  std::string hyper_desc() const override {
    return "nu=" + std::to_string(model_.theta.nu) +
           " sigma_n=" + std::to_string(model_.theta.sigma_n);
  }
  void export_model(TrainedTraitModel& out) const override { out.kernel = model_; }

 private:
  KernelModel model_;
};

DataTable matrix_to_table(const Eigen::MatrixXd& X) {
  ColumnSchema schema;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    schema.columns.push_back({"f" + std::to_string(j), ColumnKind::Numeric, {}});
  DataTable data(schema);
  data.resize_rows(static_cast<size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      data.set(static_cast<size_t>(i), static_cast<size_t>(j), X(i, j));
  return data;
}

class RfRegressor final : public TraitRegressor {
 public:
  RfRegressor(int folds, bool production) : folds_(folds), production_(production) {}
  void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, uint64_t seed) override {
    const std::vector<int> split_grid = {31, 255};
    double best = std::numeric_limits<double>::infinity();
    for (int max_splits : split_grid) {
      const double rmse = inner_cv_rmse(
          X, y, std::min(folds_, 3), [&](const auto& Xtr, const auto& ytr, const auto& Xte) {
            ForestModel m = fit_model(Xtr, ytr, max_splits, 60, seed, false);
            return predict_matrix(m, Xte);
          });
      if (rmse < best) {
        best = rmse;
        max_splits_ = max_splits;
      }
    }
    model_ = fit_model(X, y, max_splits_, 200, seed, production_);
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const override {
    return predict_matrix(model_, X);
  }
  Eigen::VectorXd predict_std(const Eigen::MatrixXd& X) const override {
    const DataTable data = matrix_to_table(X);
    Eigen::VectorXd out(X.rows());
    std::vector<double> row(data.n_cols());
    for (size_t i = 0; i < data.n_rows(); ++i) {
      for (size_t c = 0; c < data.n_cols(); ++c) row[c] = data.at(i, c);
      out[static_cast<Eigen::Index>(i)] = predict_forest(model_, row).dispersion;
    }
    return out;
  }
  std::string hyper_desc() const override { return "max_splits=" + std::to_string(max_splits_); }
  void export_model(TrainedTraitModel& out) const override { out.forest = model_; }

 private:
  static ForestModel fit_model(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               int max_splits, int n_trees, uint64_t seed, bool surrogates) {
    ForestParams params;
    params.task = TreeTask::Regression;
    params.mode = ForestMode::Bagged;
    params.n_trees = n_trees;
    params.tree.max_splits = max_splits;
    params.tree.max_surrogates = surrogates ? 5 : 0;
    const DataTable data = matrix_to_table(X);
    std::vector<double> targets(y.data(), y.data() + y.size());
    return fit_forest(data, targets, params, seed);
  }
  static Eigen::VectorXd predict_matrix(const ForestModel& model, const Eigen::MatrixXd& X) {
    Eigen::VectorXd out(X.rows());
    std::vector<double> row(static_cast<size_t>(X.cols()));
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<size_t>(j)] = X(i, j);
      out[i] = predict_forest(model, row).value;
    }
    return out;
  }

  int folds_;
  bool production_ = false;
  int max_splits_ = 255;
  ForestModel model_;
};

/// Row order canonicalized by (key hash, id): shuffling input rows with
/// matching ids leaves every realization bit-identical.
std::vector<size_t> canonical_order(const std::vector<std::string>& ids, uint64_t seed,
                                    int realization) {
  std::vector<std::pair<uint64_t, size_t>> keyed(ids.size());
  for (size_t i = 0; i < ids.size(); ++i)
    keyed[i] = {stable_key_hash(ids[i], seed * 1000003ull + static_cast<uint64_t>(realization)),
                i};
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return ids[a.second] < ids[b.second];
  });
  std::vector<size_t> order(ids.size());
  for (size_t i = 0; i < ids.size(); ++i) order[i] = keyed[i].second;
  return order;
}

std::vector<std::string> default_ids(size_t n) {
  std::vector<std::string> ids(n);
  for (size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
  return ids;
}

struct SplitData {
  Eigen::MatrixXd Xtr, Xte;
  Eigen::VectorXd ytr, yte;
};

SplitData make_split(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     const std::vector<size_t>& order, size_t n_train, size_t n_test) {
  SplitData s;
  s.Xtr.resize(static_cast<Eigen::Index>(n_train), X.cols());
  s.ytr.resize(static_cast<Eigen::Index>(n_train));
  s.Xte.resize(static_cast<Eigen::Index>(n_test), X.cols());
  s.yte.resize(static_cast<Eigen::Index>(n_test));
  for (size_t i = 0; i < n_train; ++i) {
    s.Xtr.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(order[i]));
    s.ytr[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(order[i])];
  }
  const size_t test_start = order.size() - n_test;
  for (size_t i = 0; i < n_test; ++i) {
    const size_t r = order[test_start + i];
    s.Xte.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(r));
    s.yte[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(r)];
  }
  return s;
}

RealizationResult run_realization(Method method, const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& y, const EvalProtocol& protocol,
                                  int realization, double train_fraction,
                                  const std::vector<std::string>& ids,
                                  std::vector<double>* scatter_pred,
                                  std::vector<double>* scatter_obs,
                                  std::vector<size_t>* scatter_rows) {
  const size_t n = static_cast<size_t>(X.rows());
  const auto order = canonical_order(ids, protocol.seed, realization);
  const size_t n_test =
      std::max<size_t>(1, n - static_cast<size_t>(std::llround(protocol.cv_fraction *
                                                               static_cast<double>(n))));
  size_t n_train = std::min(
      n - n_test, static_cast<size_t>(std::llround(train_fraction * static_cast<double>(n))));
  n_train = std::max<size_t>(n_train, 5);

  SplitData split = make_split(X, y, order, n_train, n_test);
  const FeatureStats stats = standardize_features(split.Xtr);
  standardize_features(split.Xte, stats);

  auto regressor = make_regressor(method, protocol.inner_folds);
  regressor->fit(split.Xtr, split.ytr,
                 protocol.seed * 7919ull + static_cast<uint64_t>(realization));
  const Eigen::VectorXd pred = regressor->predict(split.Xte);

  std::vector<double> pv(pred.data(), pred.data() + pred.size());
  std::vector<double> ov(split.yte.data(), split.yte.data() + split.yte.size());
  const RegressionMetrics metrics = compute_metrics(pv, ov);
  if (scatter_pred) {
    *scatter_pred = pv;
    *scatter_obs = ov;
    scatter_rows->assign(order.end() - static_cast<long>(n_test), order.end());
  }
  return {metrics.me, metrics.rmse, metrics.r, regressor->hyper_desc()};
}

void aggregate(EvalReport& report) {
  double me = 0.0, rmse = 0.0, r = 0.0, r2 = 0.0;
  size_t n_r = 0;
  for (const auto& real : report.realizations) {
    me += real.me;
    rmse += real.rmse;
    if (real.r.has_value()) {
      r += *real.r;
      r2 += *real.r * *real.r;
      ++n_r;
    }
  }
  const double k = static_cast<double>(report.realizations.size());
  report.me_mean = me / k;
  report.rmse_mean = rmse / k;
  if (n_r > 0) {
    report.r_mean = r / static_cast<double>(n_r);
    report.r_std =
        std::sqrt(std::max(0.0, r2 / static_cast<double>(n_r) - report.r_mean * report.r_mean));
  }
}

}  // namespace

std::unique_ptr<TraitRegressor> make_regressor(Method method, int inner_folds,
                                               bool production) {
  switch (method) {
    case Method::RLR: return std::make_unique<RlrRegressor>(inner_folds);
    case Method::RF: return std::make_unique<RfRegressor>(inner_folds, production);
    case Method::ELM: return std::make_unique<ElmRegressor>(inner_folds);
    case Method::KRR: return std::make_unique<KrrRegressor>(inner_folds);
    case Method::GPR: return std::make_unique<GprRegressor>();
  }
  throw Error("unknown method");
}

EvalReport evaluate_method(Method method, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const EvalProtocol& protocol) {
  if (X.rows() < 10) throw Error("evaluate_method: need at least 10 samples");
  if (X.rows() != y.size()) throw Error("evaluate_method: X/y size mismatch");
  if (protocol.realizations < 1) throw Error("evaluate_method: need >= 1 realization");

  const std::vector<std::string> ids = protocol.sample_ids.empty()
                                           ? default_ids(static_cast<size_t>(X.rows()))
                                           : protocol.sample_ids;
  if (ids.size() != static_cast<size_t>(X.rows()))
    throw Error("evaluate_method: sample_ids length mismatch");

  EvalReport report;
  report.method = method;
  report.n = static_cast<size_t>(X.rows());
  report.realizations.resize(static_cast<size_t>(protocol.realizations));
  std::vector<std::vector<double>> sp(1), so(1);
  std::vector<size_t> rows0;

  parallel_for(static_cast<size_t>(protocol.realizations), protocol.n_threads, [&](size_t r) {
    report.realizations[r] = run_realization(
        method, X, y, protocol, static_cast<int>(r), protocol.cv_fraction, ids,
        r == 0 ? &sp[0] : nullptr, r == 0 ? &so[0] : nullptr, r == 0 ? &rows0 : nullptr);
  });
  report.scatter_pred = std::move(sp[0]);
  report.scatter_obs = std::move(so[0]);
  report.scatter_rows = std::move(rows0);
  report.n_test = report.scatter_pred.size();
  aggregate(report);
  return report;
}

std::vector<RobustnessPoint> robustness_curve(Method method, const Eigen::MatrixXd& X,
                                              const Eigen::VectorXd& y,
                                              const std::vector<double>& fractions,
                                              const EvalProtocol& protocol) {
  std::vector<RobustnessPoint> out;
  const std::vector<std::string> ids = protocol.sample_ids.empty()
                                           ? default_ids(static_cast<size_t>(X.rows()))
                                           : protocol.sample_ids;
  for (double fraction : fractions) {
    const size_t n_train =
        static_cast<size_t>(std::llround(fraction * static_cast<double>(X.rows())));
    if (n_train < 5) throw Error("robustness_curve: fraction leaves fewer than 5 training rows");

    EvalReport report;
    report.realizations.resize(static_cast<size_t>(protocol.realizations));
    parallel_for(static_cast<size_t>(protocol.realizations), protocol.n_threads, [&](size_t r) {
      report.realizations[r] = run_realization(method, X, y, protocol, static_cast<int>(r),
                                               fraction, ids, nullptr, nullptr, nullptr);
    });
    aggregate(report);
    out.push_back({fraction, report.r_mean, report.r_std, report.rmse_mean});
  }
  return out;
}

std::map<PftClass, PftResidualStats> residuals_by_pft(std::span<const double> predictions,
                                                      std::span<const double> observations,
                                                      std::span<const PftClass> dominant) {
  if (predictions.size() != observations.size() || predictions.size() != dominant.size())
    throw Error("residuals_by_pft: length mismatch");
  std::map<PftClass, std::vector<double>> groups;
  for (size_t i = 0; i < predictions.size(); ++i)
    groups[dominant[i]].push_back(predictions[i] - observations[i]);

  std::map<PftClass, PftResidualStats> out;
  for (auto& [pft, residuals] : groups) {
    PftResidualStats s;
    s.n = residuals.size();
    double sum = 0.0, sq = 0.0;
    for (double r : residuals) {
      sum += r;
      sq += r * r;
    }
    s.me = sum / static_cast<double>(s.n);
    s.rmse = std::sqrt(sq / static_cast<double>(s.n));
    s.q25 = quantile(residuals, 0.25);
    s.q50 = quantile(residuals, 0.50);
    s.q75 = quantile(residuals, 0.75);
    out[pft] = s;
  }
  return out;
}

std::vector<LatitudeBin> latitudinal_profile(std::span<const double> values,
                                             std::span<const double> lats, double bin_deg) {
  if (values.size() != lats.size()) throw Error("latitudinal_profile: length mismatch");
  if (!(bin_deg > 0.0)) throw Error("latitudinal_profile: bin_deg must be positive");

  std::map<long, std::pair<double, size_t>> bins;  // bin index -> (sum, count)
  for (size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) continue;
    const long b = static_cast<long>(std::floor((lats[i] + 90.0) / bin_deg));
    auto& [sum, count] = bins[b];
    sum += values[i];
    ++count;
  }
  std::vector<LatitudeBin> out;
  for (const auto& [b, agg] : bins) {
    LatitudeBin bin;
    bin.lat_lo = static_cast<double>(b) * bin_deg - 90.0;
    bin.lat_hi = bin.lat_lo + bin_deg;
    bin.mean = agg.first / static_cast<double>(agg.second);
    bin.count = agg.second;
    out.push_back(bin);
  }
  return out;
}

}  // namespace traitscale
