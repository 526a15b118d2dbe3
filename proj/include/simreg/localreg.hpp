#pragma once

#include <Eigen/Dense>
#include <cstddef>

#include "simreg/kernels.hpp"
#include "simreg/polybasis.hpp"

namespace simreg {

/// Points y^s (rows, S x d), responses eta^s and extra (importance) weights.
struct RegressionSample {
  Eigen::MatrixXd points;
  Eigen::VectorXd responses;
  Eigen::VectorXd weights;

  /// Builds a sample with unit extra weights.
  static RegressionSample unweighted(Eigen::MatrixXd points, Eigen::VectorXd responses);

  std::size_t size() const { return static_cast<std::size_t>(responses.size()); }
  int dim() const { return static_cast<int>(points.cols()); }
  void validate() const;
};

struct LocalFit {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double effective_weight = 0.0;
  std::size_t active_count = 0;
  double condition_estimate = 0.0;
  double objective = 0.0;  // weighted check loss; quantile fits only
  int iterations = 0;      // solver iterations; quantile fits only
};

struct MeanFitOptions {
  double max_condition = 1e12;
  double ridge = 0.0;
};

struct QuantileFitOptions {
  double max_condition = 1e12;
  int max_iterations = 200;
  double gap_tolerance = 1e-12;
};

/// rho_tau(x) = (tau - 1(x <= 0)) x
double check_function(double x, double tau);

/// Weighted local polynomial least squares at the origin.
///
/// Minimizes sum_s (eta_s - beta' basis(y_s))^2 omega_s kappa(y_s / h). The
/// intercept (coefficient of the zero multi-index) is the estimate at zero.
/// The fit is computed in the rescaled regressors y / h and mapped back, so
/// coefficients refer to the unscaled basis.
///
/// Throws InsufficientSupport when fewer than basis.size() draws carry
/// positive weight and SingularDesign when the condition estimate of the
/// weighted Gram matrix exceeds options.max_condition (unless a ridge is
/// configured, in which case the ridge is added and the fit proceeds).
LocalFit local_poly_mean(const RegressionSample& sample, const Kernel& kernel, double h,
                         const MultiIndexSet& basis, const MeanFitOptions& options = {});

/// Weighted local polynomial quantile regression at the origin.
///
/// Minimizes sum_s rho_tau(eta_s - beta' basis(y_s)) omega_s kappa(y_s / h)
/// with a primal-dual interior point method on the linear-programming dual,
/// followed by a vertex polish. Throws InsufficientSupport or
/// SolverNotConverged.
LocalFit local_poly_quantile(const RegressionSample& sample, const Kernel& kernel, double h,
                             const MultiIndexSet& basis, double tau,
                             const QuantileFitOptions& options = {});

/// Unweighted linear quantile regression: min_beta sum_i w_i rho_tau(y_i - x_i' beta).
/// Exposed for the solver oracle tests.
struct QuantileSolution {
  Eigen::VectorXd beta;
  double objective = 0.0;
  int iterations = 0;
};

QuantileSolution solve_quantile_regression(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           const Eigen::VectorXd& w, double tau,
                                           const QuantileFitOptions& options = {});

double quantile_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& w, const Eigen::VectorXd& beta, double tau);

}  // namespace simreg
