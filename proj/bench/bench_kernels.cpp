#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>

#include "simreg/parallel.hpp"
#include "simreg/rng.hpp"

namespace {

using namespace simreg;

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  DrawEngine engine(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(engine);
  }
  return m;
}

void set_threads(const benchmark::State& state) { omp_set_num_threads(static_cast<int>(state.range(1))); }

void BM_KernelWeightsPar(benchmark::State& state) {
  set_threads(state);
  const auto points = random_matrix(state.range(0), 3, 1);
  const Eigen::VectorXd extra = Eigen::VectorXd::Ones(points.rows());
  const Kernel k(KernelFamily::epanechnikov, 3);
  for (auto _ : state) benchmark::DoNotOptimize(par::kernel_weights(points, k, 1.5, extra));
}

void BM_KernelWeightsRef(benchmark::State& state) {
  const auto points = random_matrix(state.range(0), 3, 1);
  const Eigen::VectorXd extra = Eigen::VectorXd::Ones(points.rows());
  const Kernel k(KernelFamily::epanechnikov, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ref::kernel_weights(points, k, 1.5, extra));
}

void BM_TallSkinnyQrPar(benchmark::State& state) {
  set_threads(state);
  const auto a = random_matrix(state.range(0), 10, 2);
  const Eigen::VectorXd b = random_matrix(state.range(0), 1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(par::tall_skinny_qr(a, b));
}

void BM_TallSkinnyQrRef(benchmark::State& state) {
  const auto a = random_matrix(state.range(0), 10, 2);
  const Eigen::VectorXd b = random_matrix(state.range(0), 1, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ref::tall_skinny_qr(a, b));
}

void BM_CrossProductsPar(benchmark::State& state) {
  set_threads(state);
  const auto a = random_matrix(state.range(0), 10, 4);
  const Eigen::VectorXd d = random_matrix(state.range(0), 1, 5).cwiseAbs();
  const Eigen::VectorXd v = random_matrix(state.range(0), 1, 6);
  Eigen::MatrixXd ata;
  Eigen::VectorXd atv;
  for (auto _ : state) {
    par::weighted_cross_products(a, d, v, ata, atv);
    benchmark::DoNotOptimize(ata.data());
  }
}

void BM_CrossProductsRef(benchmark::State& state) {
  const auto a = random_matrix(state.range(0), 10, 4);
  const Eigen::VectorXd d = random_matrix(state.range(0), 1, 5).cwiseAbs();
  const Eigen::VectorXd v = random_matrix(state.range(0), 1, 6);
  Eigen::MatrixXd ata;
  Eigen::VectorXd atv;
  for (auto _ : state) {
    ref::weighted_cross_products(a, d, v, ata, atv);
    benchmark::DoNotOptimize(ata.data());
  }
}

}  // namespace

BENCHMARK(BM_KernelWeightsPar)->ArgsProduct({{20000, 200000}, {1, 2, 4, 8}});
BENCHMARK(BM_KernelWeightsRef)->Arg(20000)->Arg(200000);
BENCHMARK(BM_TallSkinnyQrPar)->ArgsProduct({{20000, 200000}, {1, 2, 4, 8}});
BENCHMARK(BM_TallSkinnyQrRef)->Arg(20000)->Arg(200000);
BENCHMARK(BM_CrossProductsPar)->ArgsProduct({{20000, 200000}, {1, 2, 4, 8}});
BENCHMARK(BM_CrossProductsRef)->Arg(20000)->Arg(200000);

BENCHMARK_MAIN();
