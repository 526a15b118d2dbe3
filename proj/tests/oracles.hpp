#pragma once

// Independent reference computations used by several tests.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "simreg/kernels.hpp"
#include "simreg/polybasis.hpp"

namespace testing_support {

inline double rho(double x, double tau) { return x * (tau - (x <= 0.0 ? 1.0 : 0.0)); }

inline double check_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                              const Eigen::VectorXd& beta, double tau) {
  double f = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) f += w[i] * rho(y[i] - x.row(i).dot(beta), tau);
  return f;
}

// Exhaustive minimum of the weighted check objective for designs with one or
// two columns: an optimum of the linear program sits at a basic solution that
// interpolates as many positive-weight observations as there are columns.
inline double exhaustive_quantile_minimum(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& w, double tau) {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (w[i] > 0.0) rows.push_back(i);
  }
  double best = std::numeric_limits<double>::infinity();
  const Eigen::Index q = x.cols();
  if (q == 1) {
    for (auto i : rows) {
      if (x(i, 0) == 0.0) continue;
      Eigen::VectorXd b(1);
      b[0] = y[i] / x(i, 0);
      best = std::min(best, check_objective(x, y, w, b, tau));
    }
    return best;
  }
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t c = a + 1; c < rows.size(); ++c) {
      Eigen::Matrix2d m;
      m << x.row(rows[a]), x.row(rows[c]);
      if (std::abs(m.determinant()) < 1e-12) continue;
      const Eigen::Vector2d b = m.partialPivLu().solve(Eigen::Vector2d(y[rows[a]], y[rows[c]]));
      best = std::min(best, check_objective(x, y, w, b, tau));
    }
  }
  return best;
}

// Weighted least squares by dense normal equations.
inline Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                              const Eigen::VectorXd& w) {
  const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
  return (xtw * x).ldlt().solve(xtw * y);
}

// Raw monomial design (no rescaling) for points in rows.
inline Eigen::MatrixXd monomial_design(const Eigen::MatrixXd& points, const simreg::MultiIndexSet& set) {
  Eigen::MatrixXd x(points.rows(), static_cast<Eigen::Index>(set.indices().size()));
  for (Eigen::Index s = 0; s < points.rows(); ++s) {
    for (std::size_t i = 0; i < set.indices().size(); ++i) {
      double v = 1.0;
      for (Eigen::Index j = 0; j < points.cols(); ++j) {
        v *= std::pow(points(s, j), set.indices()[i].exponents[static_cast<std::size_t>(j)]);
      }
      x(s, static_cast<Eigen::Index>(i)) = v;
    }
  }
  return x;
}

inline Eigen::VectorXd kernel_weights(const Eigen::MatrixXd& points, const simreg::Kernel& k, double h,
                                      const Eigen::VectorXd& extra) {
  Eigen::VectorXd w(points.rows());
  for (Eigen::Index s = 0; s < points.rows(); ++s) {
    std::vector<double> u(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index j = 0; j < points.cols(); ++j) u[static_cast<std::size_t>(j)] = points(s, j) / h;
    w[s] = extra[s] * k(u);
  }
  return w;
}

}  // namespace testing_support
