#pragma once

// Data-parallel kernels behind the local regression fits.
//
// Every kernel in `par` partitions its rows into fixed blocks of
// kBlockRows, works on the blocks concurrently, and combines block results
// serially in block order. The result therefore depends only on the input,
// never on the number of OpenMP threads. `ref` holds plain serial versions
// of the same computations; they are kept for tests and benchmarks.

#include <Eigen/Dense>

#include "simreg/kernels.hpp"

namespace simreg {

inline constexpr Eigen::Index kBlockRows = 512;

/// R factor and rotated right-hand side of a least-squares problem
/// min |A x - b|: A = Q R with R upper triangular (cols x cols).
struct QrReduction {
  Eigen::MatrixXd r;
  Eigen::VectorXd qtb;
};

namespace par {

/// w_s = extra_s * kernel(points_s / h). points is S x d.
Eigen::VectorXd kernel_weights(const Eigen::MatrixXd& points, const Kernel& kernel, double h,
                               const Eigen::VectorXd& extra);

/// Tall-skinny QR: Householder QR per block, then one QR of the stacked
/// block factors.
QrReduction tall_skinny_qr(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

/// A' diag(d) A and A' diag(d) v.
void weighted_cross_products(const Eigen::MatrixXd& a, const Eigen::VectorXd& d,
                             const Eigen::VectorXd& v, Eigen::MatrixXd& ata, Eigen::VectorXd& atv);

}  // namespace par

namespace ref {

Eigen::VectorXd kernel_weights(const Eigen::MatrixXd& points, const Kernel& kernel, double h,
                               const Eigen::VectorXd& extra);

QrReduction tall_skinny_qr(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

void weighted_cross_products(const Eigen::MatrixXd& a, const Eigen::VectorXd& d,
                             const Eigen::VectorXd& v, Eigen::MatrixXd& ata, Eigen::VectorXd& atv);

}  // namespace ref

}  // namespace simreg
