#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simreg/kernels.hpp"
#include "simreg/localreg.hpp"
#include "simreg/polybasis.hpp"
#include "simreg/sampling.hpp"

namespace simreg {

/// A named scalar map eta(theta).
struct Functional {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> eval;
};

/// eta_j(theta) = theta_j. Names default to theta1, theta2, ...
std::vector<Functional> coordinate_functionals(int k, std::vector<std::string> names = {});

/// (theta, simulation size m, seed) -> simulated statistic vector.
using Simulator = std::function<Eigen::VectorXd(const Eigen::VectorXd&, std::size_t, std::uint64_t)>;

struct BilProblem {
  Simulator simulator;
  Eigen::VectorXd observed;
  std::size_t n = 0;
  std::size_t m = 0;  // simulation sample size; 0 means n
  std::vector<Functional> functionals;

  std::size_t simulation_size() const { return m == 0 ? n : m; }
  void validate() const;
};

enum class WeightPolicy { identity, fixed, two_step, continuous_updating };

WeightPolicy parse_weight_policy(const std::string& name);
std::string to_string(WeightPolicy policy);

using MomentFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using CovarianceFunction = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct GmmProblem {
  MomentFunction moments;
  int moment_dim = 0;  // d
  int param_dim = 0;   // k
  std::size_t n = 0;
  WeightPolicy policy = WeightPolicy::identity;
  Eigen::MatrixXd weight;          // fixed W, or the resolved two-step W
  CovarianceFunction covariance;   // Sigma-hat(theta), for two_step and continuous_updating
  std::vector<Functional> functionals;

  void validate() const;
  /// W(theta) under the configured policy. A two-step problem must be
  /// resolved with with_two_step_weight first.
  Eigen::MatrixXd weight_at(const Eigen::VectorXd& theta) const;
  bool weight_varies() const { return policy == WeightPolicy::continuous_updating; }
};

/// Copy of `problem` whose weight is Sigma-hat(theta0)^{-1}.
GmmProblem with_two_step_weight(const GmmProblem& problem, const Eigen::VectorXd& theta0);

/// Shared regressors y^s with one response column per functional.
struct RegressorBatch {
  Eigen::MatrixXd points;     // S x d
  Eigen::MatrixXd responses;  // S x J
  Eigen::VectorXd weights;    // S
  std::vector<std::string> names;
  std::size_t failures = 0;   // draws dropped because evaluation failed

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  RegressionSample sample(std::size_t j) const;
};

/// y^s = T_m^s - T_n for each draw; the simulator for draw s is seeded with
/// derive_seed(draws.seed, {stream::simulation, s}). Failed simulations are
/// dropped and counted.
RegressorBatch bil_regressors(const BilProblem& problem, const DrawBatch& draws);

/// y^s = g(theta^s) + m^{-1/2} W(theta^s)^{-1/2} xi^s with xi^s standard
/// normal from derive_seed(noise_seed, s). With add_noise false, xi = 0.
RegressorBatch gmm_regressors(const GmmProblem& problem, const DrawBatch& draws, std::size_t m,
                              std::uint64_t noise_seed, bool add_noise = true);

/// Symmetric M with M M = W^{-1}.
Eigen::MatrixXd matrix_inverse_sqrt(const Eigen::MatrixXd& w);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct PosteriorSummary {
  std::string name;
  double point_estimate = 0.0;
  std::map<double, double> quantiles;
  double ci_level = 0.0;
  Interval interval;
  bool quantiles_crossed = false;  // interval endpoints came back reversed
  double effective_weight = 0.0;
  std::size_t active_count = 0;
  double bandwidth = 0.0;
  double quantile_bandwidth = 0.0;

  /// Quantile at tau, matched to 1e-12. Throws ValidationError if absent.
  double quantile(double tau) const;
  bool has_quantile(double tau) const;
};

struct EstimateOptions {
  double ci_level = 0.9;                     // 0 disables the interval
  std::vector<double> quantile_levels;       // additional quantiles to report
  std::optional<BandwidthRule> quantile_rule;  // defaults to the mean rule
  std::optional<MultiIndexSet> quantile_basis;  // defaults to the mean basis
  MeanFitOptions mean;
  QuantileFitOptions quantile;
};

/// Resolves a fixed or nearest-neighbor rule against the sample.
double resolve_bandwidth(const RegressionSample& sample, const BandwidthRule& rule);

/// Point estimate by local polynomial mean regression and posterior
/// quantiles by local polynomial quantile regression, all at y = 0. The
/// interval is (q_{t/2}, q_{1-t/2}) with t = 1 - ci_level. Errors from the
/// fits are rethrown with the resolved bandwidth attached.
PosteriorSummary estimate(const RegressionSample& sample, const Kernel& kernel,
                          const BandwidthRule& rule, const MultiIndexSet& basis,
                          const EstimateOptions& options = {});

/// Interval rescaled about the posterior median by sqrt(m / min(n, m)).
Interval rescale_interval(const PosteriorSummary& summary, std::size_t m, std::size_t n, double level);

/// Simulated Laplace estimator: self-normalized mean of theta^s under
/// log-weights log omega_s + log pi(theta^s) - n/2 g' W g. `prior` may be
/// empty for a flat prior.
Eigen::VectorXd sl_gmm_estimate(const GmmProblem& problem, const DrawBatch& draws,
                                const Density& prior = {});

}  // namespace simreg
