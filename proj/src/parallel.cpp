#include "simreg/parallel.hpp"

#include <omp.h>

#include <vector>

namespace simreg {

namespace {

Eigen::Index block_count(Eigen::Index rows) { return (rows + kBlockRows - 1) / kBlockRows; }

double squared_norm_row(const Eigen::MatrixXd& points, Eigen::Index s, double inv_h) {
  double r2 = 0.0;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const double v = points(s, j) * inv_h;
    r2 += v * v;
  }
  return r2;
}

// Householder QR of [a | b] restricted to the leading `cols` columns; returns
// the top `cols` rows of R and Q'b.
QrReduction reduce_block(const Eigen::MatrixXd& ab, Eigen::Index cols) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(ab);
  const Eigen::Index k = std::min(ab.rows(), cols + 1);
  Eigen::MatrixXd packed = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  QrReduction out;
  out.r = Eigen::MatrixXd::Zero(cols, cols);
  out.qtb = Eigen::VectorXd::Zero(cols);
  const Eigen::Index rk = std::min(k, cols);
  out.r.topRows(rk) = packed.topLeftCorner(rk, cols);
  out.qtb.head(rk) = packed.col(cols).head(rk);
  return out;
}

Eigen::MatrixXd stack(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, Eigen::Index begin,
                      Eigen::Index rows) {
  Eigen::MatrixXd ab(rows, a.cols() + 1);
  ab.leftCols(a.cols()) = a.middleRows(begin, rows);
  ab.col(a.cols()) = b.segment(begin, rows);
  return ab;
}

}  // namespace

namespace par {

Eigen::VectorXd kernel_weights(const Eigen::MatrixXd& points, const Kernel& kernel, double h,
                               const Eigen::VectorXd& extra) {
  const Eigen::Index n = points.rows();
  const double inv_h = 1.0 / h;
  Eigen::VectorXd w(n);
#pragma omp parallel for schedule(static)
  for (Eigen::Index s = 0; s < n; ++s) {
    w[s] = extra[s] == 0.0 ? 0.0 : extra[s] * kernel.from_squared_norm(squared_norm_row(points, s, inv_h));
  }
  return w;
}

QrReduction tall_skinny_qr(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const Eigen::Index cols = a.cols();
  const Eigen::Index blocks = block_count(a.rows());
  if (blocks <= 1) return reduce_block(stack(a, b, 0, a.rows()), cols);

  std::vector<QrReduction> partial(blocks);
#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    const Eigen::Index begin = blk * kBlockRows;
    const Eigen::Index rows = std::min(kBlockRows, a.rows() - begin);
    partial[blk] = reduce_block(stack(a, b, begin, rows), cols);
  }

  Eigen::MatrixXd stacked(blocks * cols, cols + 1);
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    stacked.block(blk * cols, 0, cols, cols) = partial[blk].r;
    stacked.block(blk * cols, cols, cols, 1) = partial[blk].qtb;
  }
  return reduce_block(stacked, cols);
}

void weighted_cross_products(const Eigen::MatrixXd& a, const Eigen::VectorXd& d,
                             const Eigen::VectorXd& v, Eigen::MatrixXd& ata, Eigen::VectorXd& atv) {
  const Eigen::Index cols = a.cols();
  const Eigen::Index blocks = block_count(a.rows());
  std::vector<Eigen::MatrixXd> part_m(blocks);
  std::vector<Eigen::VectorXd> part_v(blocks);
#pragma omp parallel for schedule(static)
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    const Eigen::Index begin = blk * kBlockRows;
    const Eigen::Index rows = std::min(kBlockRows, a.rows() - begin);
    const auto ab = a.middleRows(begin, rows);
    const auto db = d.segment(begin, rows);
    Eigen::MatrixXd scaled = db.asDiagonal() * ab;
    part_m[blk] = ab.transpose() * scaled;
    part_v[blk] = scaled.transpose() * v.segment(begin, rows);
  }
  ata = Eigen::MatrixXd::Zero(cols, cols);
  atv = Eigen::VectorXd::Zero(cols);
  for (Eigen::Index blk = 0; blk < blocks; ++blk) {
    ata += part_m[blk];
    atv += part_v[blk];
  }
}

}  // namespace par

namespace ref {

Eigen::VectorXd kernel_weights(const Eigen::MatrixXd& points, const Kernel& kernel, double h,
                               const Eigen::VectorXd& extra) {
  const double inv_h = 1.0 / h;
  Eigen::VectorXd w(points.rows());
  for (Eigen::Index s = 0; s < points.rows(); ++s) {
    w[s] = extra[s] == 0.0 ? 0.0 : extra[s] * kernel.from_squared_norm(squared_norm_row(points, s, inv_h));
  }
  return w;
}

QrReduction tall_skinny_qr(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  return reduce_block(stack(a, b, 0, a.rows()), a.cols());
}

void weighted_cross_products(const Eigen::MatrixXd& a, const Eigen::VectorXd& d,
                             const Eigen::VectorXd& v, Eigen::MatrixXd& ata, Eigen::VectorXd& atv) {
  const Eigen::Index cols = a.cols();
  ata = Eigen::MatrixXd::Zero(cols, cols);
  atv = Eigen::VectorXd::Zero(cols);
  for (Eigen::Index s = 0; s < a.rows(); ++s) {
    for (Eigen::Index i = 0; i < cols; ++i) {
      const double di = d[s] * a(s, i);
      atv[i] += di * v[s];
      for (Eigen::Index j = 0; j < cols; ++j) ata(i, j) += di * a(s, j);
    }
  }
}

}  // namespace ref

}  // namespace simreg
