#include "simreg/localreg.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "simreg/errors.hpp"
#include "simreg/parallel.hpp"

namespace simreg {

RegressionSample RegressionSample::unweighted(Eigen::MatrixXd points, Eigen::VectorXd responses) {
  RegressionSample s;
  s.weights = Eigen::VectorXd::Ones(responses.size());
  s.points = std::move(points);
  s.responses = std::move(responses);
  return s;
}

void RegressionSample::validate() const {
  if (responses.size() < 1) throw ValidationError("regression sample is empty");
  if (points.rows() != responses.size() || weights.size() != responses.size()) {
    throw ValidationError("regression sample has mismatched lengths");
  }
  bool any_positive = false;
  for (Eigen::Index s = 0; s < weights.size(); ++s) {
    if (!(weights[s] >= 0.0) || !std::isfinite(weights[s])) {
      throw ValidationError("extra weights must be finite and nonnegative");
    }
    any_positive = any_positive || weights[s] > 0.0;
  }
  if (!any_positive) throw ValidationError("all extra weights are zero");
}

double check_function(double x, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
  return (tau - (x <= 0.0 ? 1.0 : 0.0)) * x;
}

namespace {

struct WeightedDesign {
  std::vector<Eigen::Index> active;  // rows with positive total weight
  Eigen::VectorXd weight;            // total weight of active rows
  Eigen::MatrixXd basis;             // basis at y / h, one row per active draw
  double effective_weight = 0.0;
};

WeightedDesign build_design(const RegressionSample& sample, const Kernel& kernel, double h,
                            const MultiIndexSet& basis) {
  sample.validate();
  if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("bandwidth must be positive");
  if (sample.dim() != basis.dim() || kernel.dim() != basis.dim()) {
    throw ValidationError("sample, kernel and basis dimensions disagree");
  }

  const Eigen::VectorXd w = par::kernel_weights(sample.points, kernel, h, sample.weights);

  WeightedDesign out;
  for (Eigen::Index s = 0; s < w.size(); ++s) {
    out.effective_weight += w[s];
    if (w[s] > 0.0) out.active.push_back(s);
  }
  const auto q = basis.size();
  if (out.active.size() < q) {
    throw InsufficientSupport("only " + std::to_string(out.active.size()) +
                                  " draws carry positive weight; the basis needs " +
                                  std::to_string(q),
                              out.active.size(), q, h);
  }

  const auto m = static_cast<Eigen::Index>(out.active.size());
  out.weight.resize(m);
  out.basis.resize(m, static_cast<Eigen::Index>(q));
  Eigen::Matrix<double, 1, Eigen::Dynamic> row(q);
  std::vector<double> y(sample.dim());
#pragma omp parallel for schedule(static) firstprivate(row, y)
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index s = out.active[i];
    for (int j = 0; j < sample.dim(); ++j) y[j] = sample.points(s, j);
    evaluate_basis_into(y.data(), basis, h, row.data());
    out.basis.row(i) = row;
    out.weight[i] = w[s];
  }
  return out;
}

double condition_of(const Eigen::MatrixXd& r) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
  const auto& sv = svd.singularValues();
  const double smax = sv[0];
  const double smin = sv[sv.size() - 1];
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  const double c = smax / smin;
  return c * c;
}

// Maps coefficients of the basis in y / h back to the basis in y.
void unscale(Eigen::VectorXd& beta, const MultiIndexSet& basis, double h) {
  for (std::size_t i = 0; i < basis.size(); ++i) beta[i] /= std::pow(h, basis[i].order());
}

// Condition estimate of the weighted Gram matrix of the scaled design.
double design_condition(const WeightedDesign& design, Eigen::MatrixXd* r_out = nullptr,
                        Eigen::VectorXd* qtb_out = nullptr, const Eigen::VectorXd* rhs = nullptr) {
  const double wmax = design.weight.maxCoeff();
  const Eigen::VectorXd sw = (design.weight / wmax).cwiseSqrt();
  const Eigen::MatrixXd a = sw.asDiagonal() * design.basis;
  const Eigen::VectorXd b = rhs ? Eigen::VectorXd(sw.cwiseProduct(*rhs)) : Eigen::VectorXd::Zero(a.rows());
  QrReduction red = par::tall_skinny_qr(a, b);
  const double cond = condition_of(red.r);
  if (r_out) *r_out = std::move(red.r);
  if (qtb_out) *qtb_out = std::move(red.qtb);
  return cond;
}

Eigen::VectorXd active_responses(const RegressionSample& sample, const WeightedDesign& design) {
  Eigen::VectorXd eta(static_cast<Eigen::Index>(design.active.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = sample.responses[design.active[i]];
  return eta;
}

}  // namespace

LocalFit local_poly_mean(const RegressionSample& sample, const Kernel& kernel, double h,
                         const MultiIndexSet& basis, const MeanFitOptions& options) {
  const WeightedDesign design = build_design(sample, kernel, h, basis);
  const Eigen::VectorXd eta = active_responses(sample, design);

  Eigen::MatrixXd r;
  Eigen::VectorXd qtb;
  double cond = design_condition(design, &r, &qtb, &eta);
  const auto q = static_cast<Eigen::Index>(basis.size());

  if (options.ridge > 0.0) {
    Eigen::MatrixXd ar(2 * q, q);
    ar << r, std::sqrt(options.ridge) * Eigen::MatrixXd::Identity(q, q);
    Eigen::VectorXd br(2 * q);
    br << qtb, Eigen::VectorXd::Zero(q);
    QrReduction red = ref::tall_skinny_qr(ar, br);
    r = std::move(red.r);
    qtb = std::move(red.qtb);
    cond = condition_of(r);
  } else if (!(cond <= options.max_condition)) {
    throw SingularDesign("weighted design is singular (condition estimate " + std::to_string(cond) +
                             ")",
                         cond, h);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rr(r);
  Eigen::VectorXd beta = rr.solve(qtb);
  unscale(beta, basis, h);

  LocalFit fit;
  fit.intercept = beta[0];
  fit.coefficients = std::move(beta);
  fit.effective_weight = design.effective_weight;
  fit.active_count = design.active.size();
  fit.condition_estimate = cond;
  return fit;
}

LocalFit local_poly_quantile(const RegressionSample& sample, const Kernel& kernel, double h,
                             const MultiIndexSet& basis, double tau,
                             const QuantileFitOptions& options) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
  const WeightedDesign design = build_design(sample, kernel, h, basis);
  const Eigen::VectorXd eta = active_responses(sample, design);

  const double cond = design_condition(design);
  if (!(cond <= options.max_condition)) {
    throw SingularDesign("weighted design is singular (condition estimate " + std::to_string(cond) +
                             ")",
                         cond, h);
  }

  // The check loss is positively homogeneous, so normalizing the weights
  // leaves the minimizer unchanged.
  const double wmax = design.weight.maxCoeff();
  QuantileSolution sol =
      solve_quantile_regression(design.basis, eta, design.weight / wmax, tau, options);

  Eigen::VectorXd beta = sol.beta;
  unscale(beta, basis, h);

  LocalFit fit;
  fit.intercept = beta[0];
  fit.coefficients = std::move(beta);
  fit.effective_weight = design.effective_weight;
  fit.active_count = design.active.size();
  fit.condition_estimate = cond;
  fit.objective = sol.objective * wmax;
  fit.iterations = sol.iterations;
  return fit;
}

}  // namespace simreg
