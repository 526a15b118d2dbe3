#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "simreg/errors.hpp"
#include "simreg/polybasis.hpp"

using namespace simreg;

namespace {

std::vector<std::vector<int>> exponents(const MultiIndexSet& set) {
  std::vector<std::vector<int>> out;
  for (const auto& u : set.indices()) out.push_back(u.exponents);
  return out;
}

long long binomial(int n, int k) {
  long long c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

}  // namespace

TEST_CASE("index set examples") {
  CHECK(exponents(build_index_set(1, 1)) == std::vector<std::vector<int>>{{0}, {1}});
  CHECK(exponents(build_index_set(3, 0)) == std::vector<std::vector<int>>{{0, 0, 0}});
  CHECK(exponents(build_index_set(2, 2)) ==
        std::vector<std::vector<int>>{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}});
}

TEST_CASE("index set cardinality and structure") {
  for (int d = 1; d <= 5; ++d) {
    for (int p = 0; p <= 4; ++p) {
      const auto set = build_index_set(d, p);
      CHECK(static_cast<long long>(set.indices().size()) == binomial(d + p, p));
      CHECK(set.indices()[0].order() == 0);
      int zeros = 0, last_order = 0;
      for (const auto& u : set.indices()) {
        int sum = 0;
        for (int e : u.exponents) sum += e;
        CHECK(u.order() == sum);
        CHECK(u.order() <= p);
        CHECK(u.order() >= last_order);  // graded
        last_order = u.order();
        zeros += u.order() == 0 ? 1 : 0;
      }
      CHECK(zeros == 1);
      CHECK(exponents(build_index_set(d, p)) == exponents(set));
    }
  }
}

TEST_CASE("index set without cross products") {
  const auto set = build_index_set(3, 2, true);
  CHECK(set.indices().size() == 7);
  for (const auto& u : set.indices()) {
    int nonzero = 0;
    for (int e : u.exponents) nonzero += e != 0 ? 1 : 0;
    CHECK(nonzero <= 1);
  }
}

TEST_CASE("index set preconditions") {
  CHECK_THROWS_AS(build_index_set(0, 1), ValidationError);
  CHECK_THROWS_AS(build_index_set(1, -1), ValidationError);
}

TEST_CASE("basis evaluation examples") {
  const auto z = evaluate_basis(std::vector<double>{0.0, 0.0}, build_index_set(2, 3));
  CHECK(z[0] == 1.0);
  for (Eigen::Index i = 1; i < z.size(); ++i) CHECK(z[i] == 0.0);
  const auto a = evaluate_basis(std::vector<double>{2.0}, build_index_set(1, 3));
  CHECK(a == Eigen::Vector4d(1, 2, 4, 8));
  const auto b = evaluate_basis(std::vector<double>{2.0, 3.0}, build_index_set(2, 2));
  Eigen::VectorXd expect(6);
  expect << 1, 2, 3, 4, 6, 9;
  CHECK(b == expect);
  CHECK_THROWS_AS(evaluate_basis(std::vector<double>{1.0}, build_index_set(2, 1)), ValidationError);
}

TEST_CASE("basis evaluation matches an independent exponentiation loop") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int d = 1; d <= 4; ++d) {
    const auto set = build_index_set(d, 4);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> y(static_cast<std::size_t>(d));
      for (double& v : y) v = u(rng);
      const auto b = evaluate_basis(y, set);
      for (std::size_t i = 0; i < set.indices().size(); ++i) {
        double expect = 1.0;
        for (int j = 0; j < d; ++j) {
          for (int e = 0; e < set.indices()[i].exponents[static_cast<std::size_t>(j)]; ++e) {
            expect *= y[static_cast<std::size_t>(j)];
          }
        }
        CHECK(b[static_cast<Eigen::Index>(i)] == doctest::Approx(expect).epsilon(1e-13));
      }
    }
  }
}
