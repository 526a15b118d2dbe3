#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "simreg/estimators.hpp"
#include "simreg/sampling.hpp"

namespace simreg {

// ---------------------------------------------------------------------------
// Normal sample means: Xbar ~ N(L mu, Sigma / n) with a Gaussian prior on mu.
// Exactly identified when L = I (k = d); overidentified when k = 1 and L is
// the ones vector, with prior mean u0 l and prior covariance sigma0^2 l l'.
// ---------------------------------------------------------------------------

struct NormalMeansModel {
  int d = 1;
  int k = 1;
  Eigen::MatrixXd sigma;       // known data covariance (d x d)
  Eigen::VectorXd prior_mean;  // k
  Eigen::MatrixXd prior_cov;   // k x k
  std::size_t n = 100;

  static NormalMeansModel exact(Eigen::VectorXd prior_mean, Eigen::MatrixXd prior_cov,
                                Eigen::MatrixXd sigma, std::size_t n);
  static NormalMeansModel overidentified(int d, double u0, double sigma0_sq, Eigen::MatrixXd sigma,
                                         std::size_t n);

  bool is_overidentified() const { return k == 1 && d > 1; }
  void validate() const;

  /// Loading matrix L (d x k): identity or the ones column.
  Eigen::MatrixXd loading() const;
  Prior prior() const;

  /// Draws Xbar at the true mean directly from its sampling distribution.
  Eigen::VectorXd generate_mean(const Eigen::VectorXd& mu, std::uint64_t seed) const;

  /// g(mu) = L mu - Xbar with the optimal fixed weight Sigma^{-1}.
  GmmProblem gmm_problem(const Eigen::VectorXd& xbar) const;

  /// Statistic T_m = sample mean of m draws, simulated from N(L mu, Sigma / m).
  BilProblem bil_problem(const Eigen::VectorXd& xbar) const;
};

struct GaussianPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Exact posterior of mu given Y = y where Y = L mu - Xbar + Sigma^{1/2} xi / sqrt(n).
GaussianPosterior normal_analytic_posterior(const NormalMeansModel& model, const Eigen::VectorXd& xbar,
                                            const Eigen::VectorXd& y);

/// Large-n limit of the overidentified posterior mean:
/// (l' Sigma^{-1} l)^{-1} l' Sigma^{-1} (Xbar + y).
double normal_gls_limit(const NormalMeansModel& model, const Eigen::VectorXd& xbar,
                        const Eigen::VectorXd& y);

// ---------------------------------------------------------------------------
// Quantile IV: y = x' beta + eps, eps = exp((z' alpha)^2 upsilon) - 1.
// ---------------------------------------------------------------------------

struct QuantileIvModel {
  Eigen::Vector3d alpha = Eigen::Vector3d::Constant(0.2);
  Eigen::Vector2d beta = Eigen::Vector2d::Ones();
  double tau = 0.5;
  std::size_t n = 200;

  void validate() const;
};

struct IvDataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  // n x 2, first column ones
  Eigen::MatrixXd z;  // n x 3, first column ones

  std::size_t size() const { return static_cast<std::size_t>(y.size()); }

  /// Columns y, x1, x2, z1, z2, z3 with a header row.
  void write_csv(std::ostream& os) const;
  static IvDataset read_csv(std::istream& is);
};

IvDataset quantile_iv_generate(const QuantileIvModel& model, std::uint64_t seed);

struct IvMoments {
  Eigen::VectorXd g;       // n^{-1} sum z_i (tau - 1(y_i <= x_i' beta))
  Eigen::MatrixXd weight;  // (n^{-1} sum z_i z_i')^{-1}
};

IvMoments quantile_iv_moments(const IvDataset& data, const Eigen::VectorXd& beta, double tau);

/// Moment vector only; the inner loop of ABC-GMM on this model.
Eigen::VectorXd quantile_iv_g(const IvDataset& data, const Eigen::VectorXd& beta, double tau);

/// n^{-1} sum z_i z_i' (tau - 1(y_i <= x_i' beta))^2
Eigen::MatrixXd quantile_iv_covariance(const IvDataset& data, const Eigen::VectorXd& beta, double tau);

enum class IvWeight { optimal, instrument_gram, identity };

IvWeight parse_iv_weight(const std::string& name);
std::string to_string(IvWeight weight);

/// ABC-GMM problem over beta. `optimal` uses the fixed weight
/// (tau (1 - tau) n^{-1} sum z_i z_i')^{-1}; `instrument_gram` drops the
/// tau (1 - tau) factor.
GmmProblem quantile_iv_problem(const IvDataset& data, double tau, IvWeight weight = IvWeight::optimal);

struct IvEstimate {
  Eigen::VectorXd beta;
  Eigen::VectorXd std_error;  // heteroskedasticity-robust
};

/// Two-stage least squares of y on x with instruments z.
IvEstimate iv_baseline(const IvDataset& data);

// ---------------------------------------------------------------------------
// Location-scale toy model for the BIL path: theta = (mu, sigma), statistics
// (sample mean, sample standard deviation) of m normal variates.
// ---------------------------------------------------------------------------

struct ToyLocationScaleModel {
  double mu = 0.0;
  double sigma = 1.0;
  std::size_t n = 100;

  void validate() const;
};

Eigen::Vector2d toy_location_scale_simulate(const ToyLocationScaleModel& model, std::size_t m,
                                            std::uint64_t seed);

/// BIL problem with observed statistic `observed` from a sample of size n.
BilProblem toy_bil_problem(const Eigen::Vector2d& observed, std::size_t n, std::size_t m = 0);

}  // namespace simreg
