#include "traitscale/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "traitscale/error.hpp"
#include "traitscale/metrics.hpp"
#include "traitscale/rng.hpp"

namespace traitscale {

LinearModel fit_rlr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  if (X.rows() != y.size()) throw Error("fit_rlr: X/y size mismatch");
  if (X.rows() < 1) throw Error("fit_rlr: need at least one row");
  if (lambda < 0.0) throw Error("fit_rlr: lambda must be non-negative");

  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  LinearModel model;
  model.ridge_lambda = lambda;
  if (lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xc);
    if (qr.rank() < X.cols())
      throw Error("fit_rlr: rank-deficient design with lambda = 0; use lambda > 0");
    model.weights = qr.solve(yc);
  } else {
    const Eigen::MatrixXd A =
        Xc.transpose() * Xc + lambda * Eigen::MatrixXd::Identity(X.cols(), X.cols());
    model.weights = A.ldlt().solve(Xc.transpose() * yc);
  }
  model.bias = y_mean - x_mean * model.weights;
  return model;
}

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& X) {
  return (X * model.weights).array() + model.bias;
}

namespace {

Eigen::MatrixXd elm_hidden(const Eigen::MatrixXd& X, const ElmModel& model) {
  Eigen::MatrixXd act = X * model.hidden_weights;
  act.rowwise() += model.hidden_bias;
  return (1.0 / (1.0 + (-act.array()).exp())).matrix();
}

}  // namespace

ElmModel fit_elm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int hidden, double lambda,
                 uint64_t seed) {
  if (hidden < 1) throw Error("fit_elm: hidden count must be >= 1");
  if (X.rows() != y.size()) throw Error("fit_elm: X/y size mismatch");

  ElmModel model;
  model.seed = seed;
  model.ridge_lambda = lambda;
  RngStream rng(seed);
  model.hidden_weights.resize(X.cols(), hidden);
  for (Eigen::Index j = 0; j < hidden; ++j)
    for (Eigen::Index i = 0; i < X.cols(); ++i)
      model.hidden_weights(i, j) = rng.uniform(-1.0, 1.0);
  model.hidden_bias.resize(hidden);
  for (Eigen::Index j = 0; j < hidden; ++j) model.hidden_bias(j) = rng.uniform(-1.0, 1.0);

  const Eigen::MatrixXd H = elm_hidden(X, model);
  const Eigen::RowVectorXd h_mean = H.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Hc = H.rowwise() - h_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  const Eigen::MatrixXd A =
      Hc.transpose() * Hc + std::max(lambda, 1e-12) * Eigen::MatrixXd::Identity(hidden, hidden);
  model.output_weights = A.ldlt().solve(Hc.transpose() * yc);
  model.output_bias = y_mean - h_mean * model.output_weights;
  return model;
}

Eigen::VectorXd predict(const ElmModel& model, const Eigen::MatrixXd& X) {
  return (elm_hidden(X, model) * model.output_weights).array() + model.output_bias;
}

Eigen::MatrixXd ard_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const ArdParams& theta) {
  if (A.cols() != B.cols()) throw Error("ard_kernel: feature dimension mismatch");
  if (theta.sigma_f.size() != A.cols())
    throw Error("ard_kernel: sigma_f length must match feature count");
  if (!(theta.nu > 0.0)) throw Error("ard_kernel: nu must be positive");
  for (Eigen::Index f = 0; f < theta.sigma_f.size(); ++f)
    if (!(theta.sigma_f[f] > 0.0)) throw Error("ard_kernel: sigma_f must be positive");

  const Eigen::ArrayXd inv_two_s2 = 0.5 / theta.sigma_f.array().square();
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < B.rows(); ++j) {
      const Eigen::ArrayXd d = (A.row(i) - B.row(j)).array();
      K(i, j) = theta.nu * std::exp(-(d.square() * inv_two_s2).sum());
    }
  }
  return K;
}

namespace {

Eigen::MatrixXd train_kernel(const Eigen::MatrixXd& X, const ArdParams& theta,
                             KernelKind kind) {
  Eigen::MatrixXd K;
  if (kind == KernelKind::Ard)
    K = ard_kernel(X, X, theta);
  else
    K = X * X.transpose();
  K.diagonal().array() += theta.sigma_n * theta.sigma_n;
  return K;
}

/// LLT with escalating diagonal jitter (1e-10 .. 1e-6 of the mean
/// diagonal) before declaring failure.
std::pair<Eigen::LLT<Eigen::MatrixXd>, double> robust_llt(Eigen::MatrixXd K) {
  const double scale = std::max(K.diagonal().mean(), 1e-300);
  double jitter = 0.0;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() == Eigen::Success) return {llt, jitter};
    const double add = scale * 1e-10 * std::pow(10.0, attempt);
    K.diagonal().array() += add - jitter;
    jitter = add;
    if (add > scale * 1e-6) break;
  }
  throw Error("kernel factorization failed after jitter escalation");
}

}  // namespace

KernelModel fit_krr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ArdParams& theta,
                    KernelKind kernel) {
  if (X.rows() < 2) throw Error("fit_krr: need at least 2 rows");
  if (X.rows() != y.size()) throw Error("fit_krr: X/y size mismatch");

  KernelModel model;
  model.train_X = X;
  model.theta = theta;
  model.kernel = kernel;
  model.alpha0 = y.mean();
  const Eigen::VectorXd yc = y.array() - model.alpha0;
  auto [llt, jitter] = robust_llt(train_kernel(X, theta, kernel));
  model.jitter = jitter;
  model.alphas = llt.solve(yc);
  model.chol_lower = llt.matrixL();
  return model;
}

Eigen::VectorXd kernel_predict(const KernelModel& model, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd Kx;
  if (model.kernel == KernelKind::Ard)
    Kx = ard_kernel(X, model.train_X, model.theta);
  else
    Kx = X * model.train_X.transpose();
  return (Kx * model.alphas).array() + model.alpha0;
}

Eigen::VectorXd gpr_predictive_variance(const KernelModel& model, const Eigen::MatrixXd& X) {
  if (!model.is_gpr) throw Error("predictive variance requires a GPR model");
  const Eigen::MatrixXd Kx = ard_kernel(model.train_X, X, model.theta);  // N x M
  const Eigen::MatrixXd V =
      model.chol_lower.triangularView<Eigen::Lower>().solve(Kx);  // L^-1 k*
  Eigen::VectorXd var(X.rows());
  for (Eigen::Index j = 0; j < X.rows(); ++j)
    var[j] = std::max(0.0, model.theta.nu - V.col(j).squaredNorm());
  return var;
}

double gpr_log_marginal(const Eigen::MatrixXd& X, const Eigen::VectorXd& yc,
                        const ArdParams& theta, Eigen::VectorXd* grad) {
  const Eigen::Index n = X.rows(), f = X.cols();
  const Eigen::MatrixXd Kf = ard_kernel(X, X, theta);
  Eigen::MatrixXd K = Kf;
  K.diagonal().array() += theta.sigma_n * theta.sigma_n;
  auto [llt, jitter] = robust_llt(K);
  (void)jitter;

  const Eigen::VectorXd alpha = llt.solve(yc);
  const Eigen::MatrixXd L = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) log_det += std::log(L(i, i));
  const double lml = -0.5 * yc.dot(alpha) - log_det -
                     0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!grad) return lml;

  // d lml / d theta_j = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta_j)
  Eigen::MatrixXd M = alpha * alpha.transpose();
  M -= llt.solve(Eigen::MatrixXd::Identity(n, n));

  grad->resize(f + 2);
  // d/d log nu: dK = Kf
  (*grad)[0] = 0.5 * (M.array() * Kf.array()).sum();
  // d/d log sigma_f: dK_ij = Kf_ij * d_ij,f^2 / sigma_f^2
  for (Eigen::Index j = 0; j < f; ++j) {
    const double inv_s2 = 1.0 / (theta.sigma_f[j] * theta.sigma_f[j]);
    double acc = 0.0;
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b) {
        const double d = X(a, j) - X(b, j);
        acc += M(a, b) * Kf(a, b) * d * d * inv_s2;
      }
    (*grad)[1 + j] = 0.5 * acc;
  }
  // d/d log sigma_n: dK = 2 sigma_n^2 I
  (*grad)[f + 1] = theta.sigma_n * theta.sigma_n * M.trace();
  return lml;
}

namespace {

ArdParams unpack_log(const Eigen::VectorXd& p, Eigen::Index f) {
  ArdParams theta;
  theta.nu = std::exp(p[0]);
  theta.sigma_f = p.segment(1, f).array().exp();
  theta.sigma_n = std::exp(p[f + 1]);
  return theta;
}

}  // namespace

KernelModel fit_gpr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const GprOptions& options) {
  if (X.rows() < 2) throw Error("fit_gpr: need at least 2 rows");
  if (X.rows() != y.size()) throw Error("fit_gpr: X/y size mismatch");

  const Eigen::Index f = X.cols();
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;
  const double y_var = std::max(yc.squaredNorm() / static_cast<double>(y.size()), 1e-12);

  Eigen::VectorXd lo(f + 2), hi(f + 2);
  lo[0] = std::log(options.nu_min);
  hi[0] = std::log(options.nu_max);
  for (Eigen::Index j = 0; j < f; ++j) {
    lo[1 + j] = std::log(options.sigma_f_min);
    hi[1 + j] = std::log(options.sigma_f_max);
  }
  lo[f + 1] = std::log(options.sigma_n_min);
  hi[f + 1] = std::log(options.sigma_n_max);
  auto clamp_params = [&](Eigen::VectorXd& p) {
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = std::clamp(p[i], lo[i], hi[i]);
  };

  double best_lml = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_params;

  for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
    Eigen::VectorXd p(f + 2);
    p[0] = std::log(y_var);
    const double base_scale = std::sqrt(static_cast<double>(f));
    for (Eigen::Index j = 0; j < f; ++j) p[1 + j] = std::log(base_scale);
    p[f + 1] = std::log(std::max(0.1 * std::sqrt(y_var), options.sigma_n_min * 2.0));
    if (restart > 0) {
      RngStream rng = RngStream::derive(options.seed, static_cast<uint64_t>(restart));
      for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += rng.uniform(-1.5, 1.5);
    }
    clamp_params(p);

    Eigen::VectorXd grad;
    double lml = gpr_log_marginal(X, yc, unpack_log(p, f), &grad);
    double step = 0.1;
    for (int iter = 0; iter < options.max_iters; ++iter) {
      if (grad.lpNorm<Eigen::Infinity>() < options.grad_tol) break;
      bool accepted = false;
      double trial_step = step;
      for (int half = 0; half < 30; ++half) {
        Eigen::VectorXd q = p + trial_step * grad;
        clamp_params(q);
        Eigen::VectorXd trial_grad;
        double trial_lml;
        try {
          trial_lml = gpr_log_marginal(X, yc, unpack_log(q, f), &trial_grad);
        } catch (const Error&) {
          trial_step *= 0.5;
          continue;
        }
        if (std::isfinite(trial_lml) && trial_lml > lml + 1e-12) {
          p = std::move(q);
          lml = trial_lml;
          grad = std::move(trial_grad);
          step = trial_step * 1.5;
          accepted = true;
          break;
        }
        trial_step *= 0.5;
      }
      if (!accepted) break;
    }
    if (lml > best_lml) {
      best_lml = lml;
      best_params = p;
    }
  }
  if (!std::isfinite(best_lml)) throw Error("fit_gpr: non-finite marginal likelihood");

  KernelModel model = fit_krr(X, y, unpack_log(best_params, f), KernelKind::Ard);
  model.is_gpr = true;
  return model;
}

KernelModel fit_krr_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KrrGrid& grid,
                       uint64_t seed) {
  const Eigen::Index n = X.rows();
  if (n < 4) throw Error("fit_krr_cv: need at least 4 rows");
  const double y_std = std::sqrt(
      std::max((y.array() - y.mean()).square().sum() / static_cast<double>(n), 1e-12));
  const double base_scale = std::sqrt(static_cast<double>(X.cols()));

  const int folds = std::min<int>(grid.folds, static_cast<int>(n / 2));
  std::vector<int> fold_of(static_cast<size_t>(n));
  {
    RngStream rng(seed ^ 0x4c55ull);
    std::vector<size_t> order(static_cast<size_t>(n));
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (size_t i = 0; i < order.size(); ++i)
      fold_of[order[i]] = static_cast<int>(i % static_cast<size_t>(folds));
  }

  double best_rmse = std::numeric_limits<double>::infinity();
  ArdParams best_theta;
  const double y_var = y_std * y_std;

  for (double ls : grid.lengthscale_factors) {
    for (double nf : grid.noise_factors) {
      ArdParams theta;
      theta.nu = y_var;
      theta.sigma_f = Eigen::VectorXd::Constant(X.cols(), ls * base_scale);
      theta.sigma_n = std::max(nf * y_std, 1e-8);

      double sq_sum = 0.0;
      size_t count = 0;
      for (int fold = 0; fold < folds; ++fold) {
        std::vector<Eigen::Index> train, test;
        for (Eigen::Index i = 0; i < n; ++i)
          (fold_of[static_cast<size_t>(i)] == fold ? test : train).push_back(i);
        if (train.size() < 2 || test.empty()) continue;
        Eigen::MatrixXd Xtr(train.size(), X.cols()), Xte(test.size(), X.cols());
        Eigen::VectorXd ytr(train.size());
        for (size_t i = 0; i < train.size(); ++i) {
          Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train[i]);
          ytr[static_cast<Eigen::Index>(i)] = y[train[i]];
        }
        for (size_t i = 0; i < test.size(); ++i)
          Xte.row(static_cast<Eigen::Index>(i)) = X.row(test[i]);
        const KernelModel m = fit_krr(Xtr, ytr, theta);
        const Eigen::VectorXd pred = kernel_predict(m, Xte);
        for (size_t i = 0; i < test.size(); ++i) {
          const double e = pred[static_cast<Eigen::Index>(i)] - y[test[i]];
          sq_sum += e * e;
          ++count;
        }
      }
      if (count == 0) continue;
      const double rmse = std::sqrt(sq_sum / static_cast<double>(count));
      if (rmse < best_rmse) {
        best_rmse = rmse;
        best_theta = theta;
      }
    }
  }
  if (!std::isfinite(best_rmse)) throw Error("fit_krr_cv: grid produced no scores");
  return fit_krr(X, y, best_theta);
}

}  // namespace traitscale
