#include "simreg/kernels.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "simreg/errors.hpp"

namespace simreg {

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "epanechnikov") return KernelFamily::epanechnikov;
  if (name == "uniform") return KernelFamily::uniform;
  throw ValidationError("unknown kernel family '" + std::string(name) + "'");
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::gaussian:
      return "gaussian";
    case KernelFamily::epanechnikov:
      return "epanechnikov";
    case KernelFamily::uniform:
      return "uniform";
  }
  return "unknown";
}

double unit_ball_volume(int d) {
  const double half = 0.5 * d;
  return std::pow(std::numbers::pi, half) / std::tgamma(half + 1.0);
}

Kernel::Kernel(KernelFamily family, int dim) : family_(family), dim_(dim) {
  if (dim < 1) throw ValidationError("kernel dimension must be positive");
  switch (family) {
    case KernelFamily::gaussian:
      norm_ = std::pow(2.0 * std::numbers::pi, -0.5 * dim);
      break;
    case KernelFamily::epanechnikov:
      norm_ = (dim + 2.0) / (2.0 * unit_ball_volume(dim));
      break;
    case KernelFamily::uniform:
      norm_ = 1.0 / unit_ball_volume(dim);
      break;
  }
}

double Kernel::from_squared_norm(double r2) const {
  switch (family_) {
    case KernelFamily::gaussian:
      return norm_ * std::exp(-0.5 * r2);
    case KernelFamily::epanechnikov:
      return r2 < 1.0 ? norm_ * (1.0 - r2) : 0.0;
    case KernelFamily::uniform:
      return r2 <= 1.0 ? norm_ : 0.0;
  }
  return 0.0;
}

double Kernel::operator()(std::span<const double> u) const {
  if (static_cast<int>(u.size()) != dim_) {
    throw ValidationError("kernel argument has dimension " + std::to_string(u.size()) +
                          ", expected " + std::to_string(dim_));
  }
  double r2 = 0.0;
  for (double v : u) r2 += v * v;
  return from_squared_norm(r2);
}

BandwidthRule BandwidthRule::fixed(double h) {
  BandwidthRule r;
  r.mode = BandwidthMode::fixed;
  r.h = h;
  r.validate();
  return r;
}

BandwidthRule BandwidthRule::nearest_neighbor(std::size_t k) {
  BandwidthRule r;
  r.mode = BandwidthMode::nearest_neighbor;
  r.neighbors = k;
  r.validate();
  return r;
}

BandwidthRule BandwidthRule::tuned(std::vector<double> grid) {
  BandwidthRule r;
  r.mode = BandwidthMode::tuned;
  r.grid = std::move(grid);
  r.validate();
  return r;
}

void BandwidthRule::validate(std::size_t sample_size) const {
  switch (mode) {
    case BandwidthMode::fixed:
      if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("fixed bandwidth must be positive");
      break;
    case BandwidthMode::nearest_neighbor:
      if (neighbors < 1) throw ValidationError("nearest-neighbor count must be at least 1");
      if (sample_size > 0 && neighbors > sample_size) {
        throw ValidationError("nearest-neighbor count " + std::to_string(neighbors) +
                              " exceeds sample size " + std::to_string(sample_size));
      }
      break;
    case BandwidthMode::tuned:
      for (double g : grid) {
        if (!(g > 0.0)) throw ValidationError("bandwidth grid entries must be positive");
      }
      break;
  }
}

BandwidthRule BandwidthRule::parse(std::string_view text) {
  auto colon = text.find(':');
  std::string_view head = text.substr(0, colon);
  std::string_view tail = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (head == "tuned") {
    BandwidthRule r;
    r.mode = BandwidthMode::tuned;
    return r;
  }
  if (tail.empty()) throw ValidationError("bandwidth rule '" + std::string(text) + "' needs a value");
  if (head == "fixed") {
    double h = 0.0;
    try {
      h = std::stod(std::string(tail));
    } catch (const std::exception&) {
      throw ValidationError("bad bandwidth value '" + std::string(tail) + "'");
    }
    return fixed(h);
  }
  if (head == "nn") {
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), k);
    if (ec != std::errc{} || ptr != tail.data() + tail.size()) {
      throw ValidationError("bad neighbor count '" + std::string(tail) + "'");
    }
    return nearest_neighbor(k);
  }
  throw ValidationError("unknown bandwidth rule '" + std::string(text) + "'");
}

std::string BandwidthRule::to_string() const {
  std::ostringstream os;
  switch (mode) {
    case BandwidthMode::fixed: {
      char buf[32];
      auto res = std::to_chars(buf, buf + sizeof(buf), h);
      os << "fixed:" << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
      break;
    }
    case BandwidthMode::nearest_neighbor:
      os << "nn:" << neighbors;
      break;
    case BandwidthMode::tuned:
      os << "tuned";
      break;
  }
  return os.str();
}

double nearest_neighbor_bandwidth(std::span<const double> norms, std::size_t k) {
  if (norms.empty()) throw ValidationError("nearest-neighbor bandwidth of an empty sequence");
  if (k < 1 || k > norms.size()) {
    throw ValidationError("neighbor count " + std::to_string(k) + " outside [1, " +
                          std::to_string(norms.size()) + "]");
  }
  std::vector<double> sorted(norms.begin(), norms.end());
  std::stable_sort(sorted.begin(), sorted.end());
  return sorted[k - 1];
}

}  // namespace simreg
