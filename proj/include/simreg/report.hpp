#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace simreg {

/// One functional estimated by one estimator variant in one replication.
struct EstimateRow {
  std::string estimator;
  std::string parameter;
  double truth = 0.0;
  double estimate = 0.0;
  bool has_interval = false;
  double lower = 0.0;
  double upper = 0.0;
  double bandwidth = 0.0;           // resolved mean bandwidth; 0 when not applicable
  double quantile_bandwidth = 0.0;  // resolved quantile bandwidth
  std::size_t active_count = 0;
  double effective_weight = 0.0;

  bool covers() const { return has_interval && lower <= truth && truth <= upper; }
  bool operator==(const EstimateRow&) const = default;
};

struct ReplicationRecord {
  std::size_t index = 0;
  std::vector<EstimateRow> rows;
  std::vector<std::string> failures;  // "estimator: message"
  std::size_t dropped_draws = 0;
  std::size_t failed_simulations = 0;

  bool failed() const { return !failures.empty(); }
  bool operator==(const ReplicationRecord&) const = default;
};

/// Aggregate over successful replications of one estimator variant.
/// Non-applicable numeric fields (coverage without intervals, h and p for a
/// baseline) are NaN and print as NA.
struct SummaryRow {
  std::string parameter;
  std::string estimator;
  double bias = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  double level = 0.0;
  std::size_t n = 0;
  double draws = 0.0;  // S
  double h = 0.0;
  double p = 0.0;
  std::size_t replications = 0;  // successful replications entering the row
  std::size_t failures = 0;

  bool operator==(const SummaryRow&) const;
};

struct TunedBandwidth {
  std::string estimator;
  std::string parameter;
  std::string mean_rule;
  std::string quantile_rule;
  double mean_mse = 0.0;
  double coverage = 0.0;  // tuning-trial coverage at the chosen quantile rule

  bool operator==(const TunedBandwidth&) const = default;
};

struct MonteCarloReport {
  std::string command;
  std::map<std::string, std::string> config;  // run-relevant configuration entries
  std::vector<std::string> warnings;
  std::vector<TunedBandwidth> tuning;
  std::vector<SummaryRow> summary;
  std::vector<ReplicationRecord> replications;
  std::size_t failed_replications = 0;
  std::optional<double> wall_seconds;

  double failure_rate() const;
  bool operator==(const MonteCarloReport&) const = default;
};

enum class ReportFormat { csv, json };

ReportFormat parse_report_format(const std::string& name);

/// Summary table, columns parameter, estimator, bias, rmse, coverage, level,
/// n, S, h, p, R, numbers to 6 significant digits.
std::string report_to_csv(const MonteCarloReport& report);

/// Full report including per-replication rows, doubles at round-trip precision.
std::string report_to_json(const MonteCarloReport& report);
MonteCarloReport report_from_json(const std::string& text);

/// Writes the report to `path`, or to standard output when `path` is empty.
void emit_report(const MonteCarloReport& report, ReportFormat format, const std::string& path);

}  // namespace simreg
