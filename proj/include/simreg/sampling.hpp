#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "simreg/rng.hpp"

namespace simreg {

/// One-dimensional prior marginal: uniform(lower, upper) or normal(mean, sd).
struct ScalarMarginal {
  enum class Kind { uniform, normal };
  Kind kind = Kind::uniform;
  double a = 0.0;  // lower bound or mean
  double b = 1.0;  // upper bound or standard deviation

  static ScalarMarginal uniform(double lower, double upper);
  static ScalarMarginal normal(double mean, double sd);

  double density(double x) const;
  double quantile(double p) const;
  double mean() const;
};

class Prior {
 public:
  enum class Kind { uniform_box, normal, product };

  static Prior uniform_box(Eigen::VectorXd lower, Eigen::VectorXd upper);
  static Prior normal(Eigen::VectorXd mean, Eigen::MatrixXd covariance);
  static Prior product(std::vector<ScalarMarginal> marginals);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double density(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd mean() const;
  bool contains(const Eigen::VectorXd& theta) const { return density(theta) > 0.0; }

  /// Only product-form priors (including uniform boxes) map from the unit cube.
  bool supports_quasi_random() const { return kind_ != Kind::normal; }
  Eigen::VectorXd from_unit_cube(const Eigen::VectorXd& u) const;

  Eigen::VectorXd sample(DrawEngine& engine) const;

  const std::vector<ScalarMarginal>& marginals() const { return marginals_; }
  const Eigen::MatrixXd& covariance() const { return covariance_; }

 private:
  Prior() = default;

  Kind kind_ = Kind::product;
  int dim_ = 0;
  std::vector<ScalarMarginal> marginals_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd chol_;  // lower Cholesky factor of covariance_
  double log_norm_ = 0.0;
};

/// Parameter draws theta^s (rows) with importance weights. Draw s of a batch
/// is generated from derive_seed(seed, s), so it does not depend on S or on
/// the order draws are generated in.
struct DrawBatch {
  Eigen::MatrixXd draws;
  Eigen::VectorXd weights;
  std::uint64_t seed = 0;
  std::size_t dropped = 0;  // draws removed for zero target density

  std::size_t size() const { return static_cast<std::size_t>(draws.rows()); }
  int dim() const { return static_cast<int>(draws.cols()); }
  Eigen::VectorXd draw(std::size_t s) const { return draws.row(static_cast<Eigen::Index>(s)).transpose(); }
};

using Density = std::function<double(const Eigen::VectorXd&)>;

DrawBatch sample_prior(const Prior& prior, std::size_t count, std::uint64_t seed);

/// Halton draws at indices start, start + 1, ... mapped through the inverse
/// marginal CDFs. Bases are the first dim() primes.
DrawBatch sample_prior_quasi(const Prior& prior, std::size_t count, std::uint64_t start = 1);

/// Radical inverse of `index` in each base.
Eigen::VectorXd halton_point(std::uint64_t index, std::span<const int> bases);

/// First k primes.
std::vector<int> first_primes(int k);

/// Multiplies each weight by target / proposal at the draw. Draws where the
/// target density is zero are removed and counted in `dropped`.
DrawBatch importance_weights(const DrawBatch& batch, const Density& proposal, const Density& target);

/// Normal proposal centered at `estimate` with covariance diag(scale^2).
Prior adaptive_proposal(const Eigen::VectorXd& estimate, const Eigen::VectorXd& scale);

}  // namespace simreg
