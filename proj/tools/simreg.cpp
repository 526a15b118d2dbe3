#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "simreg/config.hpp"
#include "simreg/errors.hpp"
#include "simreg/harness.hpp"
#include "simreg/report.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitFailures = 2;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  std::optional<std::string> format;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config_path, "experiment configuration file (key = value lines)");
  cmd->add_option("--seed", o.seed, "base seed");
  cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "output path; standard output when omitted");
  cmd->add_option("--format", o.format, "report format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--set", o.overrides, "override a configuration entry, key=value (repeatable)");
}

simreg::ExperimentConfig load_config(const Options& o) {
  simreg::ExperimentConfig c;
  if (!o.config_path.empty()) c = simreg::ExperimentConfig::load(o.config_path);
  c = simreg::apply_overrides(c, o.overrides);
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.format) c.output_format = *o.format;
  if (!o.out.empty()) c.output_path = o.out;
  c.validate();
  return c;
}

int finish(const simreg::MonteCarloReport& report, const simreg::ExperimentConfig& c) {
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  simreg::emit_report(report, simreg::parse_report_format(c.output_format), c.output_path);
  if (report.failed_replications > 0) {
    std::cerr << report.failed_replications << " of " << report.replications.size() << " replications failed\n";
  }
  return report.failure_rate() > c.failure_threshold ? kExitFailures : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation-based estimation by local polynomial regression on simulated draws"};
  app.require_subcommand(1);
  Options o;
  auto* estimate = app.add_subcommand("estimate", "single estimation run (one replication)");
  auto* montecarlo = app.add_subcommand("montecarlo", "replication study");
  auto* tune = app.add_subcommand("tune", "bandwidth search over tune.grid");
  auto* tworound = app.add_subcommand("tworound", "replication study with a second, adaptive round");
  for (auto* cmd : {estimate, montecarlo, tune, tworound}) add_common(cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    simreg::ExperimentConfig c = load_config(o);
    if (estimate->parsed()) {
      c.replications = 1;
      simreg::MonteCarloReport r = simreg::run_experiment(c);
      r.command = "estimate";
      return finish(r, c);
    }
    if (montecarlo->parsed()) return finish(simreg::run_experiment(c), c);
    if (tworound->parsed()) return finish(simreg::run_two_round(c), c);
    if (tune->parsed()) {
      const auto tuned = simreg::tune_bandwidth(c, c.tune.grid, c.tune.truth_source, c.tune.trials);
      simreg::MonteCarloReport r;
      r.command = "tune";
      r.config = c.to_map();
      for (const char* key : {"workers", "output.path", "output.format", "report.timings"}) r.config.erase(key);
      r.tuning = tuned.selected;
      if (c.output_format == "csv") {
        // The tuning table has its own columns.
        std::string text = "estimator,parameter,mean_rule,quantile_rule,mean_mse,coverage\n";
        for (const auto& t : r.tuning) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%.6g,%.6g", t.mean_mse, t.coverage);
          text += t.estimator + ',' + t.parameter + ',' + t.mean_rule + ',' + t.quantile_rule + ',' + buf + '\n';
        }
        if (c.output_path.empty()) {
          std::cout << text;
        } else {
          std::ofstream out(c.output_path, std::ios::binary);
          if (!(out << text)) throw std::runtime_error("cannot write '" + c.output_path + "'");
        }
        return 0;
      }
      simreg::emit_report(r, simreg::ReportFormat::json, c.output_path);
      return 0;
    }
  } catch (const simreg::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const simreg::EstimationError& e) {
    std::cerr << "estimation failed: " << e.what() << '\n';
    return kExitFailures;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
