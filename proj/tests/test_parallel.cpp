#include <doctest.h>
#include <omp.h>

#include <random>

#include "simreg/parallel.hpp"

using namespace simreg;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

template <class F>
auto with_threads(int n, F&& f) {
  const int previous = omp_get_max_threads();
  omp_set_num_threads(n);
  auto out = f();
  omp_set_num_threads(previous);
  return out;
}

}  // namespace

TEST_CASE("kernel weights agree with the serial reference") {
  for (Eigen::Index rows : {1, 511, 512, 513, 3000}) {
    const auto points = random_matrix(rows, 3, 1);
    const Eigen::VectorXd extra = random_matrix(rows, 1, 2).cwiseAbs();
    const Kernel k(KernelFamily::epanechnikov, 3);
    const auto a = par::kernel_weights(points, k, 1.7, extra);
    const auto b = ref::kernel_weights(points, k, 1.7, extra);
    CHECK(a == b);
  }
}

TEST_CASE("tall-skinny QR agrees with the serial reference") {
  for (Eigen::Index rows : {6, 700, 2049}) {
    const auto a = random_matrix(rows, 6, 3);
    const Eigen::VectorXd b = random_matrix(rows, 1, 4);
    const QrReduction p = par::tall_skinny_qr(a, b);
    const QrReduction r = ref::tall_skinny_qr(a, b);
    // Both factor the same matrix: R'R = A'A and R'(Q'b) = A'b.
    const Eigen::MatrixXd ata = a.transpose() * a;
    CHECK((p.r.transpose() * p.r - ata).norm() < 1e-9 * ata.norm());
    CHECK((r.r.transpose() * r.r - ata).norm() < 1e-9 * ata.norm());
    const Eigen::VectorXd atb = a.transpose() * b;
    CHECK((p.r.transpose() * p.qtb - atb).norm() < 1e-9 * (1.0 + atb.norm()));
    // Same least-squares solution.
    const Eigen::VectorXd xp = p.r.triangularView<Eigen::Upper>().solve(p.qtb);
    const Eigen::VectorXd xr = r.r.triangularView<Eigen::Upper>().solve(r.qtb);
    CHECK((xp - xr).norm() < 1e-10 * (1.0 + xr.norm()));
  }
}

TEST_CASE("weighted cross products agree with the serial reference") {
  const auto a = random_matrix(1500, 5, 5);
  const Eigen::VectorXd d = random_matrix(1500, 1, 6).cwiseAbs();
  const Eigen::VectorXd v = random_matrix(1500, 1, 7);
  Eigen::MatrixXd ata_p, ata_r;
  Eigen::VectorXd atv_p, atv_r;
  par::weighted_cross_products(a, d, v, ata_p, atv_p);
  ref::weighted_cross_products(a, d, v, ata_r, atv_r);
  CHECK((ata_p - ata_r).norm() < 1e-11 * ata_r.norm());
  CHECK((atv_p - atv_r).norm() < 1e-11 * (1.0 + atv_r.norm()));
  const Eigen::MatrixXd dense = a.transpose() * d.asDiagonal() * a;
  CHECK((ata_p - dense).norm() < 1e-11 * dense.norm());
}

TEST_CASE("parallel kernels are bit-identical across thread counts") {
  const auto a = random_matrix(5000, 4, 8);
  const Eigen::VectorXd b = random_matrix(5000, 1, 9);
  const Eigen::VectorXd d = b.cwiseAbs();
  const auto qr1 = with_threads(1, [&] { return par::tall_skinny_qr(a, b); });
  const Kernel k(KernelFamily::gaussian, 4);
  const auto w1 = with_threads(1, [&] { return par::kernel_weights(a, k, 0.9, d); });
  auto cross = [&] {
    Eigen::MatrixXd ata;
    Eigen::VectorXd atv;
    par::weighted_cross_products(a, d, b, ata, atv);
    return std::make_pair(ata, atv);
  };
  const auto c1 = with_threads(1, cross);
  for (int threads : {2, 3, 8}) {
    const auto qr = with_threads(threads, [&] { return par::tall_skinny_qr(a, b); });
    CHECK(qr.r == qr1.r);
    CHECK(qr.qtb == qr1.qtb);
    CHECK(with_threads(threads, [&] { return par::kernel_weights(a, k, 0.9, d); }) == w1);
    const auto c = with_threads(threads, cross);
    CHECK(c.first == c1.first);
    CHECK(c.second == c1.second);
  }
}
