#include "simreg/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "simreg/errors.hpp"
#include "simreg/rng.hpp"

namespace simreg {

std::vector<Functional> coordinate_functionals(int k, std::vector<std::string> names) {
  if (!names.empty() && static_cast<int>(names.size()) != k) {
    throw ValidationError("functional names must match the parameter dimension");
  }
  std::vector<Functional> out;
  for (int j = 0; j < k; ++j) {
    std::string name = names.empty() ? "theta" + std::to_string(j + 1) : names[j];
    out.push_back({std::move(name), [j](const Eigen::VectorXd& theta) { return theta[j]; }});
  }
  return out;
}

void BilProblem::validate() const {
  if (!simulator) throw ValidationError("BIL problem has no simulator");
  if (observed.size() < 1) throw ValidationError("BIL problem has no observed statistic");
  if (n < 1) throw ValidationError("observed sample size must be at least 1");
  if (functionals.empty()) throw ValidationError("BIL problem has no functionals");
}

WeightPolicy parse_weight_policy(const std::string& name) {
  if (name == "identity") return WeightPolicy::identity;
  if (name == "fixed") return WeightPolicy::fixed;
  if (name == "two_step") return WeightPolicy::two_step;
  if (name == "continuous_updating") return WeightPolicy::continuous_updating;
  throw ValidationError("unknown weight policy '" + name + "'");
}

std::string to_string(WeightPolicy policy) {
  switch (policy) {
    case WeightPolicy::identity:
      return "identity";
    case WeightPolicy::fixed:
      return "fixed";
    case WeightPolicy::two_step:
      return "two_step";
    case WeightPolicy::continuous_updating:
      return "continuous_updating";
  }
  return "unknown";
}

void GmmProblem::validate() const {
  if (!moments) throw ValidationError("GMM problem has no moment function");
  if (moment_dim < 1 || param_dim < 1) throw ValidationError("GMM dimensions must be positive");
  if (moment_dim < param_dim) {
    throw ValidationError("GMM order condition fails: fewer moments than parameters");
  }
  if (n < 1) throw ValidationError("GMM sample size must be at least 1");
  if (functionals.empty()) throw ValidationError("GMM problem has no functionals");
  if (policy == WeightPolicy::fixed && (weight.rows() != moment_dim || weight.cols() != moment_dim)) {
    throw ValidationError("fixed weight matrix has the wrong shape");
  }
  if ((policy == WeightPolicy::continuous_updating || policy == WeightPolicy::two_step) && !covariance) {
    throw ValidationError("weight policy needs a covariance estimator");
  }
}

namespace {

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw EstimationError("covariance estimate is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(sigma.rows(), sigma.cols()));
}

}  // namespace

Eigen::MatrixXd GmmProblem::weight_at(const Eigen::VectorXd& theta) const {
  switch (policy) {
    case WeightPolicy::identity:
      return Eigen::MatrixXd::Identity(moment_dim, moment_dim);
    case WeightPolicy::fixed:
      return weight;
    case WeightPolicy::two_step:
      if (weight.rows() != moment_dim) {
        throw ValidationError("two-step weight has not been resolved from an initial estimate");
      }
      return weight;
    case WeightPolicy::continuous_updating:
      return spd_inverse(covariance(theta));
  }
  return weight;
}

GmmProblem with_two_step_weight(const GmmProblem& problem, const Eigen::VectorXd& theta0) {
  if (!problem.covariance) throw ValidationError("two-step weighting needs a covariance estimator");
  GmmProblem out = problem;
  out.policy = WeightPolicy::two_step;
  out.weight = spd_inverse(problem.covariance(theta0));
  return out;
}

RegressionSample RegressorBatch::sample(std::size_t j) const {
  RegressionSample s;
  s.points = points;
  s.responses = responses.col(static_cast<Eigen::Index>(j));
  s.weights = weights;
  return s;
}

namespace {

// Removes rows flagged as failed, preserving order.
RegressorBatch compact(Eigen::MatrixXd points, Eigen::MatrixXd responses, Eigen::VectorXd weights,
                       const std::vector<char>& failed, std::vector<std::string> names) {
  RegressorBatch out;
  out.names = std::move(names);
  const auto total = static_cast<Eigen::Index>(failed.size());
  Eigen::Index kept = 0;
  for (Eigen::Index s = 0; s < total; ++s) kept += failed[s] ? 0 : 1;
  out.failures = static_cast<std::size_t>(total - kept);
  if (kept == total) {
    out.points = std::move(points);
    out.responses = std::move(responses);
    out.weights = std::move(weights);
    return out;
  }
  out.points.resize(kept, points.cols());
  out.responses.resize(kept, responses.cols());
  out.weights.resize(kept);
  Eigen::Index i = 0;
  for (Eigen::Index s = 0; s < total; ++s) {
    if (failed[s]) continue;
    out.points.row(i) = points.row(s);
    out.responses.row(i) = responses.row(s);
    out.weights[i] = weights[s];
    ++i;
  }
  return out;
}

std::vector<std::string> functional_names(const std::vector<Functional>& functionals) {
  std::vector<std::string> names;
  for (const auto& f : functionals) names.push_back(f.name);
  return names;
}

void fill_responses(const std::vector<Functional>& functionals, const Eigen::VectorXd& theta,
                    Eigen::MatrixXd& responses, Eigen::Index s) {
  for (std::size_t j = 0; j < functionals.size(); ++j) {
    responses(s, static_cast<Eigen::Index>(j)) = functionals[j].eval(theta);
  }
}

}  // namespace

RegressorBatch bil_regressors(const BilProblem& problem, const DrawBatch& draws) {
  problem.validate();
  const auto count = static_cast<Eigen::Index>(draws.size());
  const auto d = problem.observed.size();
  const std::size_t m = problem.simulation_size();
  Eigen::MatrixXd points(count, d);
  Eigen::MatrixXd responses(count, static_cast<Eigen::Index>(problem.functionals.size()));
  std::vector<char> failed(static_cast<std::size_t>(count), 0);
  bool size_mismatch = false;

#pragma omp parallel for schedule(static)
  for (Eigen::Index s = 0; s < count; ++s) {
    const Eigen::VectorXd theta = draws.draws.row(s).transpose();
    try {
      const Eigen::VectorXd stat =
          problem.simulator(theta, m, derive_seed(draws.seed, {stream::simulation, static_cast<std::uint64_t>(s)}));
      if (stat.size() != d) {
#pragma omp atomic write
        size_mismatch = true;
        failed[s] = 1;
        continue;
      }
      if (!stat.allFinite()) {
        failed[s] = 1;
        continue;
      }
      points.row(s) = (stat - problem.observed).transpose();
      fill_responses(problem.functionals, theta, responses, s);
    } catch (const std::exception&) {
      failed[s] = 1;
    }
  }
  if (size_mismatch) throw ValidationError("simulator output length differs from the observed statistic");
  return compact(std::move(points), std::move(responses), draws.weights, failed,
                 functional_names(problem.functionals));
}

Eigen::MatrixXd matrix_inverse_sqrt(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols() || w.rows() == 0) throw ValidationError("matrix must be square and nonempty");
  const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ValidationError("matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(w);
  if (eig.info() != Eigen::Success) throw ValidationError("eigendecomposition failed");
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double tol = 1e-14 * std::max(values.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  if (!(values.minCoeff() > tol)) throw ValidationError("matrix is not positive definite");
  const Eigen::VectorXd inv_root = values.array().rsqrt();
  return eig.eigenvectors() * inv_root.asDiagonal() * eig.eigenvectors().transpose();
}

RegressorBatch gmm_regressors(const GmmProblem& problem, const DrawBatch& draws, std::size_t m,
                              std::uint64_t noise_seed, bool add_noise) {
  problem.validate();
  if (m < 1) throw ValidationError("simulation size m must be at least 1");
  const auto count = static_cast<Eigen::Index>(draws.size());
  const int d = problem.moment_dim;
  const double noise_scale = 1.0 / std::sqrt(static_cast<double>(m));

  Eigen::MatrixXd fixed_root;
  if (add_noise && !problem.weight_varies()) {
    fixed_root = matrix_inverse_sqrt(problem.weight_at(Eigen::VectorXd::Zero(problem.param_dim)));
  }

  Eigen::MatrixXd points(count, d);
  Eigen::MatrixXd responses(count, static_cast<Eigen::Index>(problem.functionals.size()));
  std::vector<char> failed(static_cast<std::size_t>(count), 0);
  bool not_pd = false;
  bool size_mismatch = false;

#pragma omp parallel for schedule(static)
  for (Eigen::Index s = 0; s < count; ++s) {
    const Eigen::VectorXd theta = draws.draws.row(s).transpose();
    Eigen::VectorXd g;
    try {
      g = problem.moments(theta);
    } catch (const std::exception&) {
      failed[s] = 1;
      continue;
    }
    if (g.size() != d) {
#pragma omp atomic write
      size_mismatch = true;
      failed[s] = 1;
      continue;
    }
    if (!g.allFinite()) {
      failed[s] = 1;
      continue;
    }
    if (add_noise) {
      DrawEngine engine(derive_seed(noise_seed, static_cast<std::uint64_t>(s)));
      std::normal_distribution<double> normal;
      Eigen::VectorXd xi(d);
      for (int j = 0; j < d; ++j) xi[j] = normal(engine);
      if (problem.weight_varies()) {
        try {
          g += noise_scale * (matrix_inverse_sqrt(problem.weight_at(theta)) * xi);
        } catch (const std::exception&) {
#pragma omp atomic write
          not_pd = true;
          failed[s] = 1;
          continue;
        }
      } else {
        g += noise_scale * (fixed_root * xi);
      }
    }
    points.row(s) = g.transpose();
    fill_responses(problem.functionals, theta, responses, s);
  }
  if (size_mismatch) throw ValidationError("moment function output length differs from moment_dim");
  if (not_pd) throw EstimationError("weight matrix is not positive definite at some draw");
  return compact(std::move(points), std::move(responses), draws.weights, failed,
                 functional_names(problem.functionals));
}

bool PosteriorSummary::has_quantile(double tau) const {
  auto it = quantiles.lower_bound(tau - 1e-12);
  return it != quantiles.end() && std::abs(it->first - tau) <= 1e-12;
}

double PosteriorSummary::quantile(double tau) const {
  auto it = quantiles.lower_bound(tau - 1e-12);
  if (it == quantiles.end() || std::abs(it->first - tau) > 1e-12) {
    throw ValidationError("summary has no quantile at level " + std::to_string(tau));
  }
  return it->second;
}

double resolve_bandwidth(const RegressionSample& sample, const BandwidthRule& rule) {
  switch (rule.mode) {
    case BandwidthMode::fixed:
      rule.validate();
      return rule.h;
    case BandwidthMode::nearest_neighbor: {
      rule.validate(sample.size());
      std::vector<double> norms(sample.size());
      for (Eigen::Index s = 0; s < sample.points.rows(); ++s) norms[s] = sample.points.row(s).norm();
      const double h = nearest_neighbor_bandwidth(norms, rule.neighbors);
      if (!(h > 0.0)) throw InsufficientSupport("nearest-neighbor bandwidth is zero", 0, rule.neighbors, h);
      return h;
    }
    case BandwidthMode::tuned:
      throw ValidationError("a tuned bandwidth rule must be resolved before estimation");
  }
  return rule.h;
}

PosteriorSummary estimate(const RegressionSample& sample, const Kernel& kernel,
                          const BandwidthRule& rule, const MultiIndexSet& basis,
                          const EstimateOptions& options) {
  sample.validate();
  if (options.ci_level < 0.0 || options.ci_level >= 1.0) {
    throw ValidationError("confidence level must lie in [0, 1)");
  }
  const MultiIndexSet& qbasis = options.quantile_basis ? *options.quantile_basis : basis;
  const BandwidthRule& qrule = options.quantile_rule ? *options.quantile_rule : rule;

  PosteriorSummary out;
  out.ci_level = options.ci_level;
  double h = 0.0;
  try {
    h = resolve_bandwidth(sample, rule);
    out.bandwidth = h;
    const LocalFit mean = local_poly_mean(sample, kernel, h, basis, options.mean);
    out.point_estimate = mean.intercept;
    out.effective_weight = mean.effective_weight;
    out.active_count = mean.active_count;

    std::vector<double> levels = options.quantile_levels;
    const double t = 1.0 - options.ci_level;
    if (options.ci_level > 0.0) {
      levels.push_back(0.5 * t);
      levels.push_back(1.0 - 0.5 * t);
    }
    if (!levels.empty()) {
      h = resolve_bandwidth(sample, qrule);
      out.quantile_bandwidth = h;
      for (double tau : levels) {
        if (out.has_quantile(tau)) continue;
        out.quantiles[tau] = local_poly_quantile(sample, kernel, h, qbasis, tau, options.quantile).intercept;
      }
    }
    if (options.ci_level > 0.0) {
      double lo = out.quantile(0.5 * t);
      double hi = out.quantile(1.0 - 0.5 * t);
      if (lo > hi) {
        std::swap(lo, hi);
        out.quantiles_crossed = true;
      }
      out.interval = {lo, hi};
    }
  } catch (InsufficientSupport& e) {
    e.set_bandwidth(h);
    throw;
  } catch (SingularDesign& e) {
    e.set_bandwidth(h);
    throw;
  }
  return out;
}

Interval rescale_interval(const PosteriorSummary& summary, std::size_t m, std::size_t n, double level) {
  if (m < 1 || n < 1) throw ValidationError("sample sizes must be positive");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must lie in (0, 1)");
  const double t = 1.0 - level;
  double lo = summary.quantile(0.5 * t);
  double hi = summary.quantile(1.0 - 0.5 * t);
  if (lo > hi) std::swap(lo, hi);
  const double med = summary.quantile(0.5);
  if (m <= n) return {lo, hi};  // factor sqrt(m / m) = 1
  const double factor = std::sqrt(static_cast<double>(m) / static_cast<double>(n));
  return {med + factor * (lo - med), med + factor * (hi - med)};
}

Eigen::VectorXd sl_gmm_estimate(const GmmProblem& problem, const DrawBatch& draws, const Density& prior) {
  problem.validate();
  if (draws.size() < 1) throw ValidationError("SL-GMM needs at least one draw");
  const auto count = static_cast<Eigen::Index>(draws.size());
  Eigen::VectorXd log_w(count);
  const double n = static_cast<double>(problem.n);

#pragma omp parallel for schedule(static)
  for (Eigen::Index s = 0; s < count; ++s) {
    const Eigen::VectorXd theta = draws.draws.row(s).transpose();
    double lw = -std::numeric_limits<double>::infinity();
    try {
      const Eigen::VectorXd g = problem.moments(theta);
      const double q = -0.5 * g.dot(problem.weight_at(theta) * g);
      const double base = std::log(draws.weights[s]) + (prior ? std::log(prior(theta)) : 0.0);
      lw = base + n * q;
    } catch (const std::exception&) {
    }
    log_w[s] = std::isnan(lw) ? -std::numeric_limits<double>::infinity() : lw;
  }

  const double max_lw = log_w.maxCoeff();
  if (!std::isfinite(max_lw)) {
    throw WeightUnderflow("every SL-GMM weight is zero", max_lw);
  }
  Eigen::VectorXd num = Eigen::VectorXd::Zero(draws.dim());
  double den = 0.0;
  for (Eigen::Index s = 0; s < count; ++s) {
    const double w = std::exp(log_w[s] - max_lw);
    if (w == 0.0) continue;
    num += w * draws.draws.row(s).transpose();
    den += w;
  }
  return num / den;
}

}  // namespace simreg
