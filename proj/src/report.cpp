#include "simreg/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <limits>

#include "simreg/errors.hpp"

namespace simreg {

namespace {

using nlohmann::json;

std::string six(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

json number(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double number_from(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

}  // namespace

bool SummaryRow::operator==(const SummaryRow& o) const {
  return parameter == o.parameter && estimator == o.estimator && same(bias, o.bias) && same(rmse, o.rmse) &&
         same(coverage, o.coverage) && same(level, o.level) && n == o.n && same(draws, o.draws) && same(h, o.h) &&
         same(p, o.p) && replications == o.replications && failures == o.failures;
}

double MonteCarloReport::failure_rate() const {
  if (replications.empty()) return 0.0;
  return static_cast<double>(failed_replications) / static_cast<double>(replications.size());
}

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ValidationError("unknown report format '" + name + "'");
}

std::string report_to_csv(const MonteCarloReport& report) {
  std::string out = "parameter,estimator,bias,rmse,coverage,level,n,S,h,p,R\n";
  for (const auto& r : report.summary) {
    out += r.parameter + ',' + r.estimator + ',' + six(r.bias) + ',' + six(r.rmse) + ',' + six(r.coverage) + ',' +
           six(r.level) + ',' + std::to_string(r.n) + ',' + six(r.draws) + ',' + six(r.h) + ',' + six(r.p) + ',' +
           std::to_string(r.replications) + '\n';
  }
  return out;
}

std::string report_to_json(const MonteCarloReport& report) {
  json j;
  j["command"] = report.command;
  j["config"] = report.config;
  j["warnings"] = report.warnings;
  json tuning = json::array();
  for (const auto& t : report.tuning) {
    tuning.push_back({{"estimator", t.estimator},
                      {"parameter", t.parameter},
                      {"mean_rule", t.mean_rule},
                      {"quantile_rule", t.quantile_rule},
                      {"mean_mse", number(t.mean_mse)},
                      {"coverage", number(t.coverage)}});
  }
  j["tuning"] = tuning;
  json summary = json::array();
  for (const auto& r : report.summary) {
    summary.push_back({{"parameter", r.parameter},
                       {"estimator", r.estimator},
                       {"bias", number(r.bias)},
                       {"rmse", number(r.rmse)},
                       {"coverage", number(r.coverage)},
                       {"level", number(r.level)},
                       {"n", r.n},
                       {"S", number(r.draws)},
                       {"h", number(r.h)},
                       {"p", number(r.p)},
                       {"R", r.replications},
                       {"failures", r.failures}});
  }
  j["summary"] = summary;
  json reps = json::array();
  for (const auto& rec : report.replications) {
    json rows = json::array();
    for (const auto& r : rec.rows) {
      json row = {{"estimator", r.estimator},
                  {"parameter", r.parameter},
                  {"truth", r.truth},
                  {"estimate", r.estimate},
                  {"bandwidth", r.bandwidth},
                  {"quantile_bandwidth", r.quantile_bandwidth},
                  {"active_count", r.active_count},
                  {"effective_weight", r.effective_weight}};
      if (r.has_interval) {
        row["lower"] = r.lower;
        row["upper"] = r.upper;
      }
      rows.push_back(row);
    }
    reps.push_back({{"index", rec.index},
                    {"rows", rows},
                    {"failures", rec.failures},
                    {"dropped_draws", rec.dropped_draws},
                    {"failed_simulations", rec.failed_simulations}});
  }
  j["replications"] = reps;
  j["failed_replications"] = report.failed_replications;
  if (report.wall_seconds) j["wall_seconds"] = *report.wall_seconds;
  return j.dump(2) + "\n";
}

MonteCarloReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report JSON does not parse: ") + e.what());
  }
  MonteCarloReport out;
  try {
    out.command = j.at("command").get<std::string>();
    out.config = j.at("config").get<std::map<std::string, std::string>>();
    out.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& t : j.at("tuning")) {
      out.tuning.push_back({t.at("estimator").get<std::string>(), t.at("parameter").get<std::string>(),
                            t.at("mean_rule").get<std::string>(), t.at("quantile_rule").get<std::string>(),
                            number_from(t.at("mean_mse")), number_from(t.at("coverage"))});
    }
    for (const auto& r : j.at("summary")) {
      SummaryRow row;
      row.parameter = r.at("parameter").get<std::string>();
      row.estimator = r.at("estimator").get<std::string>();
      row.bias = number_from(r.at("bias"));
      row.rmse = number_from(r.at("rmse"));
      row.coverage = number_from(r.at("coverage"));
      row.level = number_from(r.at("level"));
      row.n = r.at("n").get<std::size_t>();
      row.draws = number_from(r.at("S"));
      row.h = number_from(r.at("h"));
      row.p = number_from(r.at("p"));
      row.replications = r.at("R").get<std::size_t>();
      row.failures = r.at("failures").get<std::size_t>();
      out.summary.push_back(row);
    }
    for (const auto& rj : j.at("replications")) {
      ReplicationRecord rec;
      rec.index = rj.at("index").get<std::size_t>();
      rec.failures = rj.at("failures").get<std::vector<std::string>>();
      rec.dropped_draws = rj.at("dropped_draws").get<std::size_t>();
      rec.failed_simulations = rj.at("failed_simulations").get<std::size_t>();
      for (const auto& r : rj.at("rows")) {
        EstimateRow row;
        row.estimator = r.at("estimator").get<std::string>();
        row.parameter = r.at("parameter").get<std::string>();
        row.truth = r.at("truth").get<double>();
        row.estimate = r.at("estimate").get<double>();
        row.bandwidth = r.at("bandwidth").get<double>();
        row.quantile_bandwidth = r.at("quantile_bandwidth").get<double>();
        row.active_count = r.at("active_count").get<std::size_t>();
        row.effective_weight = r.at("effective_weight").get<double>();
        if (r.contains("lower")) {
          row.has_interval = true;
          row.lower = r.at("lower").get<double>();
          row.upper = r.at("upper").get<double>();
        }
        rec.rows.push_back(row);
      }
      out.replications.push_back(rec);
    }
    out.failed_replications = j.at("failed_replications").get<std::size_t>();
    if (j.contains("wall_seconds")) out.wall_seconds = j.at("wall_seconds").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("report JSON is missing fields: ") + e.what());
  }
  return out;
}

void emit_report(const MonteCarloReport& report, ReportFormat format, const std::string& path) {
  const std::string text = format == ReportFormat::csv ? report_to_csv(report) : report_to_json(report);
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace simreg
