#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

namespace simreg {

struct MultiIndex {
  std::vector<int> exponents;

  int order() const;
  bool is_zero() const { return order() == 0; }
  bool operator==(const MultiIndex&) const = default;
};

/// All multi-indices of total order <= degree in graded lexicographic order:
/// grouped by order, and within one order by descending exponent of the
/// leading coordinate. The zero index always sits at position 0.
class MultiIndexSet {
 public:
  MultiIndexSet(int dim, int degree, std::vector<MultiIndex> indices);

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  std::size_t size() const { return indices_.size(); }
  const MultiIndex& operator[](std::size_t i) const { return indices_[i]; }
  const std::vector<MultiIndex>& indices() const { return indices_; }

  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

 private:
  int dim_;
  int degree_;
  std::vector<MultiIndex> indices_;
};

inline constexpr int kMaxPolynomialDegree = 5;

/// Full basis when omit_cross_products is false; otherwise only indices with
/// at most one nonzero exponent.
MultiIndexSet build_index_set(int dim, int degree, bool omit_cross_products = false);

Eigen::VectorXd evaluate_basis(std::span<const double> y, const MultiIndexSet& basis);

/// Writes the basis at y into out (size basis.size()). No allocation; no
/// dimension check. `scale` divides y before evaluation.
void evaluate_basis_into(const double* y, const MultiIndexSet& basis, double scale, double* out);

}  // namespace simreg
