#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "simreg/config.hpp"
#include "simreg/estimators.hpp"
#include "simreg/report.hpp"
#include "simreg/sampling.hpp"

namespace simreg {

struct BaselineEstimate {
  std::string name;
  Eigen::VectorXd estimate;
  Eigen::VectorXd std_error;
};

/// One generated dataset, exposed through whichever pipelines the model
/// supports.
struct ProblemInstance {
  std::optional<GmmProblem> gmm;
  std::optional<BilProblem> bil;
  std::optional<BaselineEstimate> baseline;
};

class Model {
 public:
  virtual ~Model() = default;
  virtual std::string name() const = 0;
  virtual int param_dim() const = 0;
  virtual int statistic_dim() const = 0;
  virtual std::size_t sample_size() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;
  virtual Eigen::VectorXd true_parameter() const = 0;
  virtual Prior default_prior() const = 0;
  virtual bool supports(EstimatorKind kind) const = 0;
  virtual ProblemInstance generate(const Eigen::VectorXd& theta, std::uint64_t seed) const = 0;
  /// Label of the comparison estimator attached to generated instances.
  virtual std::optional<std::string> baseline_name() const { return std::nullopt; }
};

/// Models by name: normal_means, quantile_iv, toy_location_scale. Unknown
/// names or parameters raise ValidationError.
std::unique_ptr<Model> make_model(const std::string& name, const std::map<std::string, std::string>& params);
std::vector<std::string> registered_models();

/// The prior declared in `config`, or the model default.
Prior resolve_prior(const ExperimentConfig& config, const Model& model);

/// Estimator label for a polynomial order: LC, LL, LQ, then LP<p>.
std::string variant_name(int order);

/// Bandwidth rules per estimator variant (outer) and functional (inner).
struct RulePair {
  BandwidthRule mean;
  BandwidthRule quantile;
};
using RuleTable = std::vector<std::vector<RulePair>>;

struct TuningResult {
  RuleTable rules;
  std::vector<TunedBandwidth> selected;
};

/// For each trial, draws a true parameter (from the prior, or from pilot
/// estimates at the model's true parameter), simulates a dataset and
/// estimates with every candidate. The mean rule minimizes average squared
/// error; the quantile rule minimizes |coverage - ci_level|, ties going to
/// the narrower interval.
TuningResult tune_bandwidth(const ExperimentConfig& config, const std::vector<BandwidthRule>& grid,
                            TruthSource truth_source, std::size_t trials);

/// Replication study. Replication r uses seed derive_seed(config.seed, r)
/// for data, draws and noise. Tunes bandwidths first when the rule is
/// `tuned`.
MonteCarloReport run_experiment(const ExperimentConfig& config);

/// run_experiment with the two-round adaptive scheme enabled. The report
/// carries round-1 rows under the estimator label R1.
MonteCarloReport run_two_round(const ExperimentConfig& config);

struct VariantInfo {
  std::string label;
  double order = 0.0;  // NaN when no local polynomial is involved
  double draws = 0.0;  // NaN likewise
};

/// Summary rows for each variant and parameter, in that nesting order.
/// Replications lacking rows for a variant count as its failures.
std::vector<SummaryRow> aggregate(const std::vector<ReplicationRecord>& replications,
                                  const std::vector<VariantInfo>& variants,
                                  const std::vector<std::string>& parameters, double level, std::size_t n);

}  // namespace simreg
