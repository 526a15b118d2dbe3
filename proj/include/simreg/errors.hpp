#pragma once

#include <stdexcept>
#include <string>

namespace simreg {

/// Raised when inputs violate a documented precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Base class for failures that happen while estimating on valid inputs.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fewer draws carry positive weight than the local basis has coefficients.
class InsufficientSupport : public EstimationError {
 public:
  InsufficientSupport(const std::string& what, std::size_t active, std::size_t required,
                      double bandwidth = 0.0)
      : EstimationError(what), active_(active), required_(required), bandwidth_(bandwidth) {}

  std::size_t active() const { return active_; }
  std::size_t required() const { return required_; }
  double bandwidth() const { return bandwidth_; }
  void set_bandwidth(double h) { bandwidth_ = h; }

 private:
  std::size_t active_;
  std::size_t required_;
  double bandwidth_;
};

/// The kernel-weighted design is numerically rank deficient.
class SingularDesign : public EstimationError {
 public:
  SingularDesign(const std::string& what, double condition, double bandwidth = 0.0)
      : EstimationError(what), condition_(condition), bandwidth_(bandwidth) {}

  double condition() const { return condition_; }
  double bandwidth() const { return bandwidth_; }
  void set_bandwidth(double h) { bandwidth_ = h; }

 private:
  double condition_;
  double bandwidth_;
};

class SolverNotConverged : public EstimationError {
 public:
  SolverNotConverged(const std::string& what, double best_objective)
      : EstimationError(what), best_objective_(best_objective) {}

  double best_objective() const { return best_objective_; }

 private:
  double best_objective_;
};

/// Every exponential weight underflowed, even after max-subtraction.
class WeightUnderflow : public EstimationError {
 public:
  WeightUnderflow(const std::string& what, double max_log_weight)
      : EstimationError(what), max_log_weight_(max_log_weight) {}

  double max_log_weight() const { return max_log_weight_; }

 private:
  double max_log_weight_;
};

}  // namespace simreg
