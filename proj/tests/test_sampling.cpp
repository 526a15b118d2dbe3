#include <doctest.h>

#include <cmath>
#include <vector>

#include "simreg/errors.hpp"
#include "simreg/sampling.hpp"

using namespace simreg;

namespace {

// Radical inverse by reversing the digit string of the index.
double digit_reversal(std::uint64_t index, int base) {
  std::vector<int> digits;
  while (index > 0) {
    digits.push_back(static_cast<int>(index % static_cast<std::uint64_t>(base)));
    index /= static_cast<std::uint64_t>(base);
  }
  double value = 0.0;
  double scale = 1.0;
  for (int d : digits) {
    scale /= base;
    value += d * scale;
  }
  return value;
}

Prior unit_square() { return Prior::uniform_box(Eigen::Vector2d::Zero(), Eigen::Vector2d::Ones()); }

}  // namespace

TEST_CASE("halton examples") {
  const std::vector<int> b2{2}, b3{3};
  CHECK(halton_point(1, b2)[0] == 0.5);
  CHECK(halton_point(3, b2)[0] == 0.75);
  CHECK(halton_point(1, b3)[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const double expect[] = {1.0 / 2, 1.0 / 4, 3.0 / 4, 1.0 / 8, 5.0 / 8, 3.0 / 8, 7.0 / 8, 1.0 / 16};
  for (int i = 0; i < 8; ++i) {
    CHECK(halton_point(static_cast<std::uint64_t>(i + 1), b2)[0] == expect[i]);
    CHECK(digit_reversal(static_cast<std::uint64_t>(i + 1), 2) == expect[i]);
  }
}

TEST_CASE("halton matches an independent digit reversal") {
  const std::vector<int> bases{2, 3, 5, 7};
  for (std::uint64_t i = 1; i < 500; ++i) {
    const auto pt = halton_point(i, bases);
    for (std::size_t j = 0; j < bases.size(); ++j) {
      CHECK(pt[static_cast<Eigen::Index>(j)] == doctest::Approx(digit_reversal(i, bases[j])).epsilon(1e-15));
    }
  }
}

TEST_CASE("halton preconditions") {
  CHECK_THROWS_AS(halton_point(0, std::vector<int>{2}), ValidationError);
  CHECK_THROWS_AS(halton_point(1, std::vector<int>{1}), ValidationError);
  CHECK_THROWS_AS(halton_point(1, std::vector<int>{2, 4}), ValidationError);
  CHECK(first_primes(5) == std::vector<int>{2, 3, 5, 7, 11});
}

TEST_CASE("uniform prior draws") {
  const auto batch = sample_prior(unit_square(), 1000, 42);
  CHECK(batch.size() == 1000);
  CHECK(batch.draws.minCoeff() >= 0.0);
  CHECK(batch.draws.maxCoeff() <= 1.0);
  // Standard error of a uniform mean at S = 1000 is about 0.0091.
  const Eigen::Vector2d mean = batch.draws.colwise().mean();
  CHECK(std::abs(mean[0] - 0.5) < 0.05);
  CHECK(std::abs(mean[1] - 0.5) < 0.05);
  CHECK(batch.weights == Eigen::VectorXd::Ones(1000));
}

TEST_CASE("prior draws are deterministic and prefix stable") {
  const Prior prior = Prior::normal(Eigen::Vector2d(1, -1), Eigen::Matrix2d{{1.0, 0.3}, {0.3, 2.0}});
  const auto a = sample_prior(prior, 3, 9);
  const auto b = sample_prior(prior, 3, 9);
  CHECK(a.draws == b.draws);
  const auto c = sample_prior(prior, 300, 9);
  CHECK(c.draws.topRows(3) == a.draws);
  CHECK(sample_prior(prior, 3, 10).draws != a.draws);
}

TEST_CASE("prior validation") {
  CHECK_THROWS_AS(Prior::uniform_box(Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)), ValidationError);
  CHECK_THROWS_AS(Prior::normal(Eigen::Vector2d::Zero(), Eigen::Matrix2d{{1.0, 2.0}, {2.0, 1.0}}), ValidationError);
  CHECK_THROWS_AS(ScalarMarginal::normal(0.0, 0.0), ValidationError);
  CHECK_THROWS_AS(sample_prior(unit_square(), 0, 1), ValidationError);
}

TEST_CASE("prior densities integrate to one") {
  const Prior box = Prior::uniform_box(Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 3));
  CHECK(box.density(Eigen::Vector2d(1, 1)) == doctest::Approx(1.0 / 9.0));
  CHECK(box.density(Eigen::Vector2d(3.5, 1)) == 0.0);
  // Midpoint rule over [-8, 8]^2 for a correlated normal.
  const Prior normal = Prior::normal(Eigen::Vector2d(0.5, 0), Eigen::Matrix2d{{1.0, 0.4}, {0.4, 0.8}});
  const int grid = 400;
  const double step = 16.0 / grid;
  double mass = 0.0;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      mass += normal.density(Eigen::Vector2d(-8 + (i + 0.5) * step, -8 + (j + 0.5) * step)) * step * step;
    }
  }
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("quasi-random draws follow the Halton sequence through the marginals") {
  const Prior prior = Prior::product({ScalarMarginal::uniform(0.0, 2.0), ScalarMarginal::normal(1.0, 3.0)});
  const auto batch = sample_prior_quasi(prior, 50);
  CHECK(batch.draws(0, 0) == doctest::Approx(1.0));
  CHECK(batch.draws(0, 1) == doctest::Approx(1.0 + 3.0 * -0.4307272992954576).epsilon(1e-12));
  CHECK(batch.draws(2, 0) == doctest::Approx(1.5));
  CHECK_THROWS_AS(sample_prior_quasi(Prior::normal(Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()), 5),
                  ValidationError);
}

TEST_CASE("importance weights") {
  const auto batch = sample_prior(unit_square(), 5, 1);
  const Density one = [](const Eigen::VectorXd&) { return 1.0; };
  CHECK(importance_weights(batch, one, one).weights == Eigen::VectorXd::Ones(5));
  const Eigen::VectorXd special = batch.draw(2);
  const Density doubled = [special](const Eigen::VectorXd& t) { return t == special ? 2.0 : 1.0; };
  const auto w = importance_weights(batch, one, doubled);
  CHECK(w.weights == Eigen::VectorXd{{1.0, 1.0, 2.0, 1.0, 1.0}});
  // Weights attach multiplicatively.
  CHECK(importance_weights(w, one, doubled).weights[2] == 4.0);
  const Density zero_at_special = [special](const Eigen::VectorXd& t) { return t == special ? 0.0 : 1.0; };
  CHECK_THROWS_AS(importance_weights(batch, zero_at_special, one), ValidationError);
  const auto dropped = importance_weights(batch, one, zero_at_special);
  CHECK(dropped.size() == 4);
  CHECK(dropped.dropped == 1);
}

TEST_CASE("self-normalized importance identity") {
  // Target: uniform on the unit square. Proposal: normal centered inside it.
  const Prior target = unit_square();
  const Prior proposal = adaptive_proposal(Eigen::Vector2d(0.5, 0.5), Eigen::Vector2d(0.4, 0.4));
  auto batch = sample_prior(proposal, 100000, 77);
  batch = importance_weights(
      batch, [&](const Eigen::VectorXd& t) { return proposal.density(t); },
      [&](const Eigen::VectorXd& t) { return target.density(t); });
  auto g = [](const Eigen::VectorXd& t) { return std::cos(3.0 * t[0]) * t[1]; };
  double num = 0.0, den = 0.0, num2 = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const double w = batch.weights[static_cast<Eigen::Index>(s)];
    num += w * g(batch.draw(s));
    den += w;
  }
  const double weighted = num / den;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const double w = batch.weights[static_cast<Eigen::Index>(s)];
    num2 += w * w * std::pow(g(batch.draw(s)) - weighted, 2);
  }
  const double se = std::sqrt(num2) / den;
  // Prior average of g by plain Monte Carlo from the target.
  const auto plain = sample_prior(target, 100000, 78);
  double avg = 0.0, sq = 0.0;
  for (std::size_t s = 0; s < plain.size(); ++s) avg += g(plain.draw(s));
  avg /= static_cast<double>(plain.size());
  for (std::size_t s = 0; s < plain.size(); ++s) sq += std::pow(g(plain.draw(s)) - avg, 2);
  const double se_plain = std::sqrt(sq) / static_cast<double>(plain.size());
  CHECK(std::abs(weighted - avg) < 3.0 * std::hypot(se, se_plain));
  // Exact value: (sin 3 / 3) * 1/2.
  CHECK(std::abs(weighted - std::sin(3.0) / 6.0) < 3.0 * se);
}

TEST_CASE("adaptive proposal") {
  const Prior p = adaptive_proposal(Eigen::Vector2d(1, 2), Eigen::Vector2d(0.1, 0.1));
  CHECK(p.mean() == Eigen::Vector2d(1, 2));
  CHECK(p.covariance().diagonal().isApprox(Eigen::Vector2d(0.01, 0.01)));
  const auto batch = sample_prior(p, 10000, 3);
  std::size_t inside = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Eigen::VectorXd t = batch.draw(s);
    inside += (std::abs(t[0] - 1.0) <= 0.3 && std::abs(t[1] - 2.0) <= 0.3) ? 1 : 0;
  }
  CHECK(static_cast<double>(inside) / 10000.0 >= 0.99);
  CHECK_THROWS_AS(adaptive_proposal(Eigen::Vector2d(1, 2), Eigen::Vector2d(0.1, 0.0)), ValidationError);
}
