#include "simreg/sampling.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "simreg/errors.hpp"

namespace simreg {

ScalarMarginal ScalarMarginal::uniform(double lower, double upper) {
  if (!(lower < upper)) throw ValidationError("uniform marginal needs lower < upper");
  return {Kind::uniform, lower, upper};
}

ScalarMarginal ScalarMarginal::normal(double mean, double sd) {
  if (!(sd > 0.0)) throw ValidationError("normal marginal needs a positive standard deviation");
  return {Kind::normal, mean, sd};
}

double ScalarMarginal::density(double x) const {
  if (kind == Kind::uniform) return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0;
  const double z = (x - a) / b;
  return std::exp(-0.5 * z * z) / (b * std::sqrt(2.0 * std::numbers::pi));
}

double ScalarMarginal::quantile(double p) const {
  if (kind == Kind::uniform) return a + p * (b - a);
  return boost::math::quantile(boost::math::normal_distribution<double>(a, b), p);
}

double ScalarMarginal::mean() const { return kind == Kind::uniform ? 0.5 * (a + b) : a; }

Prior Prior::uniform_box(Eigen::VectorXd lower, Eigen::VectorXd upper) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw ValidationError("uniform box bounds must be nonempty and of equal length");
  }
  Prior p;
  p.kind_ = Kind::uniform_box;
  p.dim_ = static_cast<int>(lower.size());
  for (Eigen::Index j = 0; j < lower.size(); ++j) {
    if (!(lower[j] < upper[j])) {
      throw ValidationError("uniform box needs lower < upper in coordinate " + std::to_string(j));
    }
    p.marginals_.push_back(ScalarMarginal::uniform(lower[j], upper[j]));
  }
  return p;
}

Prior Prior::normal(Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
  const auto k = mean.size();
  if (k == 0 || covariance.rows() != k || covariance.cols() != k) {
    throw ValidationError("normal prior mean and covariance sizes disagree");
  }
  if (!covariance.isApprox(covariance.transpose(), 1e-12)) {
    throw ValidationError("normal prior covariance must be symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("normal prior covariance must be positive definite");
  }
  Prior p;
  p.kind_ = Kind::normal;
  p.dim_ = static_cast<int>(k);
  p.mean_ = std::move(mean);
  p.covariance_ = std::move(covariance);
  p.chol_ = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) log_det += 2.0 * std::log(p.chol_(j, j));
  p.log_norm_ = -0.5 * (k * std::log(2.0 * std::numbers::pi) + log_det);
  return p;
}

Prior Prior::product(std::vector<ScalarMarginal> marginals) {
  if (marginals.empty()) throw ValidationError("product prior needs at least one marginal");
  Prior p;
  p.kind_ = Kind::product;
  p.dim_ = static_cast<int>(marginals.size());
  for (const auto& m : marginals) {
    if (m.kind == ScalarMarginal::Kind::uniform && !(m.a < m.b)) {
      throw ValidationError("uniform marginal needs lower < upper");
    }
    if (m.kind == ScalarMarginal::Kind::normal && !(m.b > 0.0)) {
      throw ValidationError("normal marginal needs a positive standard deviation");
    }
  }
  p.marginals_ = std::move(marginals);
  return p;
}

double Prior::density(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim_) throw ValidationError("parameter has the wrong dimension for the prior");
  if (kind_ == Kind::normal) {
    const Eigen::VectorXd z = chol_.triangularView<Eigen::Lower>().solve(theta - mean_);
    return std::exp(log_norm_ - 0.5 * z.squaredNorm());
  }
  double d = 1.0;
  for (int j = 0; j < dim_; ++j) d *= marginals_[j].density(theta[j]);
  return d;
}

Eigen::VectorXd Prior::mean() const {
  if (kind_ == Kind::normal) return mean_;
  Eigen::VectorXd m(dim_);
  for (int j = 0; j < dim_; ++j) m[j] = marginals_[j].mean();
  return m;
}

Eigen::VectorXd Prior::from_unit_cube(const Eigen::VectorXd& u) const {
  if (!supports_quasi_random()) {
    throw ValidationError("quasi-random sampling needs a product-form prior");
  }
  Eigen::VectorXd theta(dim_);
  for (int j = 0; j < dim_; ++j) theta[j] = marginals_[j].quantile(u[j]);
  return theta;
}

Eigen::VectorXd Prior::sample(DrawEngine& engine) const {
  Eigen::VectorXd theta(dim_);
  if (kind_ == Kind::normal) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(dim_);
    for (int j = 0; j < dim_; ++j) z[j] = normal(engine);
    theta = mean_ + chol_ * z;
    return theta;
  }
  for (int j = 0; j < dim_; ++j) {
    const auto& m = marginals_[j];
    if (m.kind == ScalarMarginal::Kind::uniform) {
      theta[j] = std::uniform_real_distribution<double>(m.a, m.b)(engine);
    } else {
      theta[j] = std::normal_distribution<double>(m.a, m.b)(engine);
    }
  }
  return theta;
}

DrawBatch sample_prior(const Prior& prior, std::size_t count, std::uint64_t seed) {
  if (count < 1) throw ValidationError("draw count must be at least 1");
  DrawBatch batch;
  batch.seed = seed;
  batch.draws.resize(static_cast<Eigen::Index>(count), prior.dim());
  batch.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(count));
#pragma omp parallel for schedule(static)
  for (Eigen::Index s = 0; s < batch.draws.rows(); ++s) {
    DrawEngine engine(derive_seed(seed, static_cast<std::uint64_t>(s)));
    batch.draws.row(s) = prior.sample(engine).transpose();
  }
  return batch;
}

std::vector<int> first_primes(int k) {
  std::vector<int> primes;
  for (int c = 2; static_cast<int>(primes.size()) < k; ++c) {
    bool prime = true;
    for (int p : primes) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) primes.push_back(c);
  }
  return primes;
}

Eigen::VectorXd halton_point(std::uint64_t index, std::span<const int> bases) {
  if (index < 1) throw ValidationError("Halton index must be at least 1");
  for (std::size_t i = 0; i < bases.size(); ++i) {
    if (bases[i] < 2) throw ValidationError("Halton bases must be at least 2");
    for (std::size_t j = 0; j < i; ++j) {
      if (std::gcd(bases[i], bases[j]) != 1) throw ValidationError("Halton bases must be pairwise coprime");
    }
  }
  Eigen::VectorXd point(static_cast<Eigen::Index>(bases.size()));
  for (std::size_t j = 0; j < bases.size(); ++j) {
    const auto base = static_cast<std::uint64_t>(bases[j]);
    const double inv = 1.0 / static_cast<double>(base);
    double scale = inv;
    double value = 0.0;
    for (std::uint64_t i = index; i > 0; i /= base) {
      value += static_cast<double>(i % base) * scale;
      scale *= inv;
    }
    point[static_cast<Eigen::Index>(j)] = value;
  }
  return point;
}

DrawBatch sample_prior_quasi(const Prior& prior, std::size_t count, std::uint64_t start) {
  if (count < 1) throw ValidationError("draw count must be at least 1");
  if (!prior.supports_quasi_random()) {
    throw ValidationError("quasi-random sampling needs a product-form prior");
  }
  const auto bases = first_primes(prior.dim());
  DrawBatch batch;
  batch.seed = start;
  batch.draws.resize(static_cast<Eigen::Index>(count), prior.dim());
  batch.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(count));
  for (Eigen::Index s = 0; s < batch.draws.rows(); ++s) {
    batch.draws.row(s) = prior.from_unit_cube(halton_point(start + s, bases)).transpose();
  }
  return batch;
}

DrawBatch importance_weights(const DrawBatch& batch, const Density& proposal, const Density& target) {
  std::vector<Eigen::Index> keep;
  std::vector<double> weights;
  for (Eigen::Index s = 0; s < batch.draws.rows(); ++s) {
    const Eigen::VectorXd theta = batch.draws.row(s).transpose();
    const double p = proposal(theta);
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw ValidationError("proposal density is not positive at draw " + std::to_string(s));
    }
    const double t = target(theta);
    if (!(t >= 0.0)) throw ValidationError("target density is negative at draw " + std::to_string(s));
    if (t == 0.0) continue;
    keep.push_back(s);
    weights.push_back(batch.weights[s] * (t / p));
  }
  DrawBatch out;
  out.seed = batch.seed;
  out.dropped = batch.dropped + (batch.size() - keep.size());
  out.draws.resize(static_cast<Eigen::Index>(keep.size()), batch.draws.cols());
  out.weights.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.draws.row(static_cast<Eigen::Index>(i)) = batch.draws.row(keep[i]);
    out.weights[static_cast<Eigen::Index>(i)] = weights[i];
  }
  return out;
}

Prior adaptive_proposal(const Eigen::VectorXd& estimate, const Eigen::VectorXd& scale) {
  if (estimate.size() != scale.size()) throw ValidationError("estimate and scale lengths differ");
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    if (!(scale[j] > 0.0)) throw ValidationError("proposal scale must be strictly positive");
  }
  return Prior::normal(estimate, scale.array().square().matrix().asDiagonal());
}

}  // namespace simreg
