#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simreg/kernels.hpp"

namespace simreg {

enum class EstimatorKind { bil, abc_gmm, sl_gmm };

EstimatorKind parse_estimator_kind(const std::string& name);
std::string to_string(EstimatorKind kind);

enum class TruthSource { prior_draws, estimate_centered };

TruthSource parse_truth_source(const std::string& name);
std::string to_string(TruthSource source);

/// Prior declared in the configuration. `default` defers to the model.
struct PriorConfig {
  std::string kind = "default";  // default | uniform_box | normal
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> mean;
  std::vector<double> cov;  // row-major k x k

  bool operator==(const PriorConfig&) const = default;
};

struct TuneConfig {
  std::vector<BandwidthRule> grid;
  std::size_t trials = 20;
  TruthSource truth_source = TruthSource::prior_draws;
  bool quantile = true;  // also tune the quantile bandwidth toward nominal coverage

  bool operator==(const TuneConfig&) const = default;
};

struct RoundOneConfig {
  std::size_t draws = 10000;
  BandwidthRule bandwidth = BandwidthRule::nearest_neighbor(100);
  int order = 1;
  std::vector<double> scale;  // round-2 proposal standard deviations

  bool operator==(const RoundOneConfig&) const = default;
};

/// Flat key=value experiment description. Keys under `model.` are passed to
/// the model; `prior.`, `tune.`, `round1.`, `round2.` group the rest.
/// With `two_round` set, S, bandwidth and orders describe the second round.
struct ExperimentConfig {
  std::string model = "normal_means";
  std::map<std::string, std::string> model_params;
  EstimatorKind estimator = EstimatorKind::abc_gmm;
  std::string weight_policy = "model";  // model | identity | two_step | continuous_updating
  PriorConfig prior;

  std::size_t draws = 10000;  // S
  std::size_t simulation_size = 0;  // m; 0 means n
  bool quasi_random = false;
  bool noise = true;

  KernelFamily kernel = KernelFamily::epanechnikov;
  BandwidthRule bandwidth = BandwidthRule::nearest_neighbor(400);
  std::optional<BandwidthRule> quantile_bandwidth;
  std::vector<int> orders = {1};
  std::optional<int> quantile_order;
  bool omit_cross_products = false;
  double ci_level = 0.9;
  std::vector<double> quantile_levels;
  double ridge = 0.0;
  double max_condition = 1e12;

  std::size_t replications = 100;
  std::uint64_t seed = 1;
  int workers = 1;
  double failure_threshold = 0.1;
  bool baseline = true;

  TuneConfig tune;
  bool two_round = false;
  RoundOneConfig round1;

  bool report_timings = false;
  std::string output_path;
  std::string output_format = "csv";

  bool operator==(const ExperimentConfig&) const = default;

  /// Structural checks that need no model. Throws ValidationError.
  void validate() const;

  std::map<std::string, std::string> to_map() const;
  static ExperimentConfig from_map(const std::map<std::string, std::string>& entries);

  /// One `key = value` line per entry in a fixed key order.
  std::string serialize() const;
  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::string& path);
};

/// Parses the `key = value` text format into entries. Blank lines and lines
/// starting with '#' are skipped.
std::map<std::string, std::string> parse_entries(const std::string& text);

/// Applies `key=value` overrides on top of `base`.
ExperimentConfig apply_overrides(const ExperimentConfig& base, const std::vector<std::string>& overrides);

/// Basis cardinality binomial(d + p, p), or d * p + 1 with cross products
/// omitted.
std::size_t basis_size(int dim, int order, bool omit_cross_products);

/// Warnings for a configuration against a model with parameter dimension k,
/// moment dimension d and sample size n. Throws ValidationError when S cannot
/// support the basis.
std::vector<std::string> rate_warnings(const ExperimentConfig& config, int k, int d, std::size_t n);

}  // namespace simreg
