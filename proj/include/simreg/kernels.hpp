#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace simreg {

enum class KernelFamily { gaussian, epanechnikov, uniform };

KernelFamily parse_kernel_family(std::string_view name);
std::string to_string(KernelFamily family);

/// Radially symmetric kernel in `dim` dimensions, normalized to integrate to one.
///
/// gaussian:     (2 pi)^{-d/2} exp(-|u|^2 / 2)
/// epanechnikov: (d + 2) / (2 V_d) (1 - |u|^2) on the unit ball
/// uniform:      1 / V_d on the unit ball
///
/// where V_d is the volume of the unit ball.
class Kernel {
 public:
  Kernel(KernelFamily family, int dim);

  KernelFamily family() const { return family_; }
  int dim() const { return dim_; }
  bool bounded_support() const { return family_ != KernelFamily::gaussian; }

  /// Value at u. Throws ValidationError if u.size() != dim().
  double operator()(std::span<const double> u) const;

  /// Value as a function of the squared Euclidean norm; no dimension check.
  double from_squared_norm(double r2) const;

 private:
  KernelFamily family_;
  int dim_;
  double norm_;
};

/// Volume of the d-dimensional unit ball.
double unit_ball_volume(int d);

enum class BandwidthMode { fixed, nearest_neighbor, tuned };

struct BandwidthRule {
  BandwidthMode mode = BandwidthMode::fixed;
  double h = 1.0;
  std::size_t neighbors = 0;
  std::vector<double> grid;

  static BandwidthRule fixed(double h);
  static BandwidthRule nearest_neighbor(std::size_t k);
  static BandwidthRule tuned(std::vector<double> grid);

  /// Checks mode-specific invariants; `sample_size` bounds the neighbor count
  /// when nonzero.
  void validate(std::size_t sample_size = 0) const;

  /// "fixed:0.1", "nn:200", "tuned"
  static BandwidthRule parse(std::string_view text);
  std::string to_string() const;

  bool operator==(const BandwidthRule&) const = default;
};

/// The k-th smallest value (1-based) of `norms`.
double nearest_neighbor_bandwidth(std::span<const double> norms, std::size_t k);

}  // namespace simreg
