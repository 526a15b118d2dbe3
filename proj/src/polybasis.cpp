#include "simreg/polybasis.hpp"

#include <numeric>

#include "simreg/errors.hpp"

namespace simreg {

int MultiIndex::order() const { return std::accumulate(exponents.begin(), exponents.end(), 0); }

MultiIndexSet::MultiIndexSet(int dim, int degree, std::vector<MultiIndex> indices)
    : dim_(dim), degree_(degree), indices_(std::move(indices)) {}

namespace {

// Appends every exponent vector of length dim - pos summing to `remaining`,
// leading coordinate descending.
void enumerate_order(int pos, int remaining, std::vector<int>& current,
                     std::vector<MultiIndex>& out) {
  const int dim = static_cast<int>(current.size());
  if (pos == dim - 1) {
    current[pos] = remaining;
    out.push_back(MultiIndex{current});
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    current[pos] = e;
    enumerate_order(pos + 1, remaining - e, current, out);
  }
}

}  // namespace

MultiIndexSet build_index_set(int dim, int degree, bool omit_cross_products) {
  if (dim < 1) throw ValidationError("basis dimension must be positive");
  if (degree < 0) throw ValidationError("polynomial degree must be nonnegative");

  std::vector<MultiIndex> all;
  std::vector<int> current(dim, 0);
  for (int order = 0; order <= degree; ++order) enumerate_order(0, order, current, all);

  if (omit_cross_products) {
    std::erase_if(all, [](const MultiIndex& u) {
      int nonzero = 0;
      for (int e : u.exponents) nonzero += e != 0;
      return nonzero > 1;
    });
  }
  return MultiIndexSet(dim, degree, std::move(all));
}

void evaluate_basis_into(const double* y, const MultiIndexSet& basis, double scale, double* out) {
  const int d = basis.dim();
  const int p = basis.degree();
  // powers[j * (p + 1) + e] = (y_j / scale)^e
  double powers_stack[64];
  std::vector<double> powers_heap;
  double* powers = powers_stack;
  const int needed = d * (p + 1);
  if (needed > 64) {
    powers_heap.resize(needed);
    powers = powers_heap.data();
  }
  for (int j = 0; j < d; ++j) {
    const double v = y[j] / scale;
    double acc = 1.0;
    for (int e = 0; e <= p; ++e) {
      powers[j * (p + 1) + e] = acc;
      acc *= v;
    }
  }
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const auto& u = basis[i].exponents;
    double value = 1.0;
    for (int j = 0; j < d; ++j) {
      if (u[j] != 0) value *= powers[j * (p + 1) + u[j]];
    }
    out[i] = value;
  }
}

Eigen::VectorXd evaluate_basis(std::span<const double> y, const MultiIndexSet& basis) {
  if (static_cast<int>(y.size()) != basis.dim()) {
    throw ValidationError("basis point has dimension " + std::to_string(y.size()) + ", expected " +
                          std::to_string(basis.dim()));
  }
  Eigen::VectorXd out(basis.size());
  evaluate_basis_into(y.data(), basis, 1.0, out.data());
  return out;
}

}  // namespace simreg
