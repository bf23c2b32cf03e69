#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace traitscale {

struct LinearModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double ridge_lambda = 0.0;
};

/// weights = argmin |Xw - y|^2 + lambda |w|^2 with an unpenalized bias
/// via mean-centering. lambda = 0 on rank-deficient inputs is an error.
LinearModel fit_rlr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);
Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& X);

struct ElmModel {
  Eigen::MatrixXd hidden_weights;  // F x H, frozen at fit time
  Eigen::RowVectorXd hidden_bias;  // H
  Eigen::VectorXd output_weights;  // H
  double output_bias = 0.0;
  double ridge_lambda = 0.0;
  uint64_t seed = 0;
};

/// Single hidden layer with logistic activations; input weights drawn
/// once uniform on [-1, 1] from the seeded stream, output weights by
/// ridge least squares.
ElmModel fit_elm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int hidden, double lambda,
                 uint64_t seed);
Eigen::VectorXd predict(const ElmModel& model, const Eigen::MatrixXd& X);

/// ARD kernel hyperparameters: K(x,x') = nu * exp(-sum_f (x_f-x'_f)^2 /
/// (2 sigma_f^2)); sigma_n^2 joins the diagonal of the training kernel
/// only.
struct ArdParams {
  double nu = 1.0;
  Eigen::VectorXd sigma_f;
  double sigma_n = 0.1;
};

enum class KernelKind { Ard, Linear };

/// Cross-kernel without the noise term.
Eigen::MatrixXd ard_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const ArdParams& theta);

struct KernelModel {
  Eigen::MatrixXd train_X;
  Eigen::VectorXd alphas;
  double alpha0 = 0.0;  // mean of y
  ArdParams theta;
  KernelKind kernel = KernelKind::Ard;
  bool is_gpr = false;
  Eigen::MatrixXd chol_lower;  // of K + sigma_n^2 I (+ jitter)
  double jitter = 0.0;
};

/// alphas = (K + sigma_n^2 I)^-1 (y - mean y) via Cholesky with
/// escalating jitter. The Linear kernel kind (x.x') is a test hook for
/// the kernel/primal duality check.
KernelModel fit_krr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ArdParams& theta,
                    KernelKind kernel = KernelKind::Ard);

/// Grid CV for KRR: shared lengthscale (times sqrt F) and noise grids,
/// scored by k-fold RMSE; the winner is refit on all rows.
struct KrrGrid {
  std::vector<double> lengthscale_factors = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> noise_factors = {0.01, 0.05, 0.1, 0.3};
  int folds = 5;
};
KernelModel fit_krr_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const KrrGrid& grid,
                       uint64_t seed);

Eigen::VectorXd kernel_predict(const KernelModel& model, const Eigen::MatrixXd& X);

/// Latent predictive variance nu - k*^T (K + sigma_n^2 I)^-1 k*,
/// clamped at 0. GPR models only.
Eigen::VectorXd gpr_predictive_variance(const KernelModel& model, const Eigen::MatrixXd& X);

/// Log marginal likelihood of centered targets under the ARD kernel;
/// optionally fills the gradient with respect to log-parameters
/// [log nu, log sigma_1..F, log sigma_n].
double gpr_log_marginal(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_centered,
                        const ArdParams& theta, Eigen::VectorXd* grad = nullptr);

struct GprOptions {
  int restarts = 3;
  int max_iters = 150;
  double grad_tol = 1e-5;
  uint64_t seed = 0;
  double sigma_f_min = 1e-3, sigma_f_max = 1e3;
  double sigma_n_min = 1e-6, sigma_n_max = 1e3;
  double nu_min = 1e-8, nu_max = 1e8;
};

/// Maximizes the log marginal likelihood over log-parameters by
/// projected gradient ascent with backtracking line search; the best of
/// `restarts` starts wins.
KernelModel fit_gpr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const GprOptions& options);

}  // namespace traitscale
