// Primal-dual interior point (Frisch-Newton with Mehrotra correction) for
// weighted linear quantile regression.
//
// With rows scaled by their weights, the problem min sum rho_tau(y - X b)
// has the bounded LP dual
//
//   min c'a  s.t.  A a = rhs,  0 <= a <= 1,
//
// with c = -y, A = X', rhs = (1 - tau) X' 1. The multiplier of the equality
// constraint is -b.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "simreg/errors.hpp"
#include "simreg/localreg.hpp"
#include "simreg/parallel.hpp"

namespace simreg {

double quantile_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& w, const Eigen::VectorXd& beta, double tau) {
  const Eigen::VectorXd r = y - x * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (w[i] > 0.0) total += w[i] * check_function(r[i], tau);
  }
  return total;
}

namespace {

double max_step(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  }
  return alpha;
}

// Among the rows closest to zero residual, try the basic solution that
// interpolates them exactly.
Eigen::VectorXd polish_vertex(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& beta) {
  const Eigen::Index q = x.cols();
  const Eigen::VectorXd r = (y - x * beta).cwiseAbs();
  std::vector<Eigen::Index> order(r.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + q, order.end(),
                    [&](Eigen::Index a, Eigen::Index b) { return r[a] < r[b] || (r[a] == r[b] && a < b); });
  Eigen::MatrixXd xb(q, q);
  Eigen::VectorXd yb(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    xb.row(i) = x.row(order[i]);
    yb[i] = y[order[i]];
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(xb);
  if (!lu.isInvertible()) return beta;
  return lu.solve(yb);
}

}  // namespace

QuantileSolution solve_quantile_regression(const Eigen::MatrixXd& x_in, const Eigen::VectorXd& y_in,
                                           const Eigen::VectorXd& w_in, double tau,
                                           const QuantileFitOptions& options) {
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
  if (x_in.rows() != y_in.size() || w_in.size() != y_in.size()) {
    throw ValidationError("quantile regression inputs have mismatched lengths");
  }
  const Eigen::Index q = x_in.cols();

  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < w_in.size(); ++i) {
    if (w_in[i] < 0.0) throw ValidationError("quantile regression weights must be nonnegative");
    if (w_in[i] > 0.0) keep.push_back(i);
  }
  const auto n = static_cast<Eigen::Index>(keep.size());
  if (n < q) {
    throw InsufficientSupport("quantile regression needs at least as many weighted rows as coefficients",
                              keep.size(), static_cast<std::size_t>(q));
  }

  Eigen::MatrixXd xw(n, q);
  Eigen::VectorXd yw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    xw.row(i) = w_in[keep[i]] * x_in.row(keep[i]);
    yw[i] = w_in[keep[i]] * y_in[keep[i]];
  }
  double yscale = yw.cwiseAbs().maxCoeff();
  if (!(yscale > 0.0)) yscale = 1.0;
  const Eigen::VectorXd c = -yw / yscale;

  const Eigen::VectorXd rhs = (1.0 - tau) * xw.transpose() * Eigen::VectorXd::Ones(n);

  // Start: a = (1 - tau) is primal feasible; multiplier from least squares.
  Eigen::VectorXd a = Eigen::VectorXd::Constant(n, 1.0 - tau);
  Eigen::VectorXd s = Eigen::VectorXd::Constant(n, tau);
  Eigen::VectorXd lambda = (xw.transpose() * xw).ldlt().solve(xw.transpose() * c);
  Eigen::VectorXd resid = c - xw * lambda;
  const double shift = std::max(resid.cwiseAbs().mean(), 1e-6);
  Eigen::VectorXd z = resid.cwiseMax(0.0).array() + shift;
  Eigen::VectorXd w = (-resid).cwiseMax(0.0).array() + shift;

  Eigen::MatrixXd m;
  Eigen::VectorXd atv;
  int iter = 0;
  bool converged = false;
  for (; iter < options.max_iterations; ++iter) {
    const double gap = a.dot(z) + s.dot(w);
    const double primal = c.dot(a);
    const Eigen::VectorXd rp = rhs - xw.transpose() * a;
    const Eigen::VectorXd rd = c - xw * lambda - z + w;
    if (gap <= options.gap_tolerance * (1.0 + std::abs(primal)) &&
        rd.lpNorm<Eigen::Infinity>() <= 1e-9 && rp.lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
      converged = true;
      break;
    }
    const double mu = gap / (2.0 * n);

    const Eigen::VectorXd d = ((z.array() / a.array()) + (w.array() / s.array())).inverse();

    // Affine-scaling predictor.
    Eigen::VectorXd rxz = -(a.array() * z.array());
    Eigen::VectorXd rsw = -(s.array() * w.array());
    Eigen::VectorXd rho = rd.array() - rxz.array() / a.array() + rsw.array() / s.array();
    par::weighted_cross_products(xw, d, rho, m, atv);
    Eigen::LDLT<Eigen::MatrixXd> chol(m);
    Eigen::VectorXd dl = chol.solve(rp + atv);
    Eigen::VectorXd da = d.array() * ((xw * dl) - rho).array();
    Eigen::VectorXd ds = -da;
    Eigen::VectorXd dz = (rxz.array() - z.array() * da.array()) / a.array();
    Eigen::VectorXd dw = (rsw.array() + w.array() * da.array()) / s.array();

    double ap = std::min(max_step(a, da), max_step(s, ds));
    double ad = std::min(max_step(z, dz), max_step(w, dw));
    const double mu_aff = ((a + ap * da).dot(z + ad * dz) + (s + ap * ds).dot(w + ad * dw)) / (2.0 * n);
    const double sigma = std::pow(mu_aff / mu, 3.0);

    // Centering-corrector step reusing the factorization.
    rxz = (sigma * mu - (a.array() * z.array()) - (da.array() * dz.array())).matrix();
    rsw = (sigma * mu - (s.array() * w.array()) - (ds.array() * dw.array())).matrix();
    rho = rd.array() - rxz.array() / a.array() + rsw.array() / s.array();
    Eigen::VectorXd adr = xw.transpose() * (d.array() * rho.array()).matrix();
    dl = chol.solve(rp + adr);
    da = d.array() * ((xw * dl) - rho).array();
    ds = -da;
    dz = (rxz.array() - z.array() * da.array()) / a.array();
    dw = (rsw.array() + w.array() * da.array()) / s.array();

    ap = std::min(1.0, 0.99995 * std::min(max_step(a, da), max_step(s, ds)));
    ad = std::min(1.0, 0.99995 * std::min(max_step(z, dz), max_step(w, dw)));
    a += ap * da;
    s += ap * ds;
    lambda += ad * dl;
    z += ad * dz;
    w += ad * dw;
  }

  Eigen::VectorXd beta = -lambda * yscale;
  const Eigen::VectorXd wk = Eigen::VectorXd::Ones(n);
  // Objective on the weight-scaled rows equals the weighted objective.
  double best = quantile_objective(xw, yw, wk, beta, tau);
  if (!converged) {
    throw SolverNotConverged("quantile interior point did not converge in " +
                                 std::to_string(options.max_iterations) + " iterations",
                             best);
  }

  const Eigen::VectorXd vertex = polish_vertex(xw, yw, beta);
  const double vertex_obj = quantile_objective(xw, yw, wk, vertex, tau);
  if (vertex.allFinite() && vertex_obj <= best) {
    beta = vertex;
    best = vertex_obj;
  }

  QuantileSolution out;
  out.beta = std::move(beta);
  out.objective = best;
  out.iterations = iter;
  return out;
}

}  // namespace simreg
