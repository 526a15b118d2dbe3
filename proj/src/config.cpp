#include "simreg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "simreg/errors.hpp"
#include "simreg/polybasis.hpp"

namespace simreg {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ValidationError("key '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

long long to_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ValidationError("key '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long n = to_integer(key, v);
  if (n < 0) throw ValidationError("key '" + key + "' must be nonnegative");
  return static_cast<std::size_t>(n);
}

std::uint64_t to_seed(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ValidationError("key '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("key '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

// Canonical key order for serialization. Model and optional keys are
// interleaved where they belong.
const std::vector<std::string>& key_order() {
  static const std::vector<std::string> keys = {
      "model",          "estimator",         "weight_policy",
      "prior",          "prior.lower",       "prior.upper",
      "prior.mean",     "prior.cov",         "S",
      "m",              "quasi_random",      "noise",
      "kernel",         "bandwidth",         "quantile_bandwidth",
      "orders",         "quantile_order",    "omit_cross_products",
      "ci_level",       "quantile_levels",   "ridge",
      "max_condition",  "replications",      "seed",
      "workers",        "failure_threshold", "baseline",
      "tune.grid",      "tune.trials",       "tune.truth_source",
      "tune.quantile",  "two_round",         "round1.S",
      "round1.bandwidth", "round1.order",    "round2.scale",
      "report.timings", "output.path",       "output.format",
  };
  return keys;
}

}  // namespace

EstimatorKind parse_estimator_kind(const std::string& name) {
  if (name == "bil") return EstimatorKind::bil;
  if (name == "abc_gmm") return EstimatorKind::abc_gmm;
  if (name == "sl_gmm") return EstimatorKind::sl_gmm;
  throw ValidationError("unknown estimator '" + name + "'");
}

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::bil:
      return "bil";
    case EstimatorKind::abc_gmm:
      return "abc_gmm";
    case EstimatorKind::sl_gmm:
      return "sl_gmm";
  }
  return "unknown";
}

TruthSource parse_truth_source(const std::string& name) {
  if (name == "prior_draws") return TruthSource::prior_draws;
  if (name == "estimate_centered") return TruthSource::estimate_centered;
  throw ValidationError("unknown truth source '" + name + "'");
}

std::string to_string(TruthSource source) {
  return source == TruthSource::prior_draws ? "prior_draws" : "estimate_centered";
}

std::map<std::string, std::string> parse_entries(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(number) + " has no '='");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ValidationError("config line " + std::to_string(number) + " has an empty key");
    out[key] = trim(t.substr(eq + 1));
  }
  return out;
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> m;
  m["model"] = model;
  for (const auto& [k, v] : model_params) m["model." + k] = v;
  m["estimator"] = to_string(estimator);
  m["weight_policy"] = weight_policy;
  m["prior"] = prior.kind;
  if (!prior.lower.empty()) m["prior.lower"] = join_doubles(prior.lower);
  if (!prior.upper.empty()) m["prior.upper"] = join_doubles(prior.upper);
  if (!prior.mean.empty()) m["prior.mean"] = join_doubles(prior.mean);
  if (!prior.cov.empty()) m["prior.cov"] = join_doubles(prior.cov);
  m["S"] = std::to_string(draws);
  m["m"] = std::to_string(simulation_size);
  m["quasi_random"] = bool_text(quasi_random);
  m["noise"] = bool_text(noise);
  m["kernel"] = to_string(kernel);
  m["bandwidth"] = bandwidth.to_string();
  if (quantile_bandwidth) m["quantile_bandwidth"] = quantile_bandwidth->to_string();
  std::string ord;
  for (std::size_t i = 0; i < orders.size(); ++i) ord += (i ? "," : "") + std::to_string(orders[i]);
  m["orders"] = ord;
  if (quantile_order) m["quantile_order"] = std::to_string(*quantile_order);
  m["omit_cross_products"] = bool_text(omit_cross_products);
  m["ci_level"] = format_double(ci_level);
  m["quantile_levels"] = join_doubles(quantile_levels);
  m["ridge"] = format_double(ridge);
  m["max_condition"] = format_double(max_condition);
  m["replications"] = std::to_string(replications);
  m["seed"] = std::to_string(seed);
  m["workers"] = std::to_string(workers);
  m["failure_threshold"] = format_double(failure_threshold);
  m["baseline"] = bool_text(baseline);
  std::string grid;
  for (std::size_t i = 0; i < tune.grid.size(); ++i) grid += (i ? "," : "") + tune.grid[i].to_string();
  m["tune.grid"] = grid;
  m["tune.trials"] = std::to_string(tune.trials);
  m["tune.truth_source"] = to_string(tune.truth_source);
  m["tune.quantile"] = bool_text(tune.quantile);
  m["two_round"] = bool_text(two_round);
  m["round1.S"] = std::to_string(round1.draws);
  m["round1.bandwidth"] = round1.bandwidth.to_string();
  m["round1.order"] = std::to_string(round1.order);
  m["round2.scale"] = join_doubles(round1.scale);
  m["report.timings"] = bool_text(report_timings);
  m["output.path"] = output_path;
  m["output.format"] = output_format;
  return m;
}

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& entries) {
  ExperimentConfig c;
  const std::set<std::string> known(key_order().begin(), key_order().end());
  for (const auto& [key, value] : entries) {
    if (key.rfind("model.", 0) == 0) {
      const std::string name = key.substr(6);
      if (name.empty()) throw ValidationError("empty model parameter name");
      c.model_params[name] = value;
      continue;
    }
    if (!known.count(key)) throw ValidationError("unknown config key '" + key + "'");
    if (key == "model") c.model = value;
    else if (key == "estimator") c.estimator = parse_estimator_kind(value);
    else if (key == "weight_policy") c.weight_policy = value;
    else if (key == "prior") c.prior.kind = value;
    else if (key == "prior.lower") c.prior.lower = to_doubles(key, value);
    else if (key == "prior.upper") c.prior.upper = to_doubles(key, value);
    else if (key == "prior.mean") c.prior.mean = to_doubles(key, value);
    else if (key == "prior.cov") c.prior.cov = to_doubles(key, value);
    else if (key == "S") c.draws = to_count(key, value);
    else if (key == "m") c.simulation_size = to_count(key, value);
    else if (key == "quasi_random") c.quasi_random = to_bool(key, value);
    else if (key == "noise") c.noise = to_bool(key, value);
    else if (key == "kernel") c.kernel = parse_kernel_family(value);
    else if (key == "bandwidth") c.bandwidth = BandwidthRule::parse(value);
    else if (key == "quantile_bandwidth") {
      if (value.empty()) c.quantile_bandwidth.reset();
      else c.quantile_bandwidth = BandwidthRule::parse(value);
    } else if (key == "orders") {
      c.orders.clear();
      for (const auto& item : split(value, ',')) c.orders.push_back(static_cast<int>(to_integer(key, item)));
    } else if (key == "quantile_order") {
      if (value.empty()) c.quantile_order.reset();
      else c.quantile_order = static_cast<int>(to_integer(key, value));
    } else if (key == "omit_cross_products") c.omit_cross_products = to_bool(key, value);
    else if (key == "ci_level") c.ci_level = to_double(key, value);
    else if (key == "quantile_levels") c.quantile_levels = to_doubles(key, value);
    else if (key == "ridge") c.ridge = to_double(key, value);
    else if (key == "max_condition") c.max_condition = to_double(key, value);
    else if (key == "replications") c.replications = to_count(key, value);
    else if (key == "seed") c.seed = to_seed(key, value);
    else if (key == "workers") c.workers = static_cast<int>(to_integer(key, value));
    else if (key == "failure_threshold") c.failure_threshold = to_double(key, value);
    else if (key == "baseline") c.baseline = to_bool(key, value);
    else if (key == "tune.grid") {
      c.tune.grid.clear();
      for (const auto& item : split(value, ',')) c.tune.grid.push_back(BandwidthRule::parse(item));
    } else if (key == "tune.trials") c.tune.trials = to_count(key, value);
    else if (key == "tune.truth_source") c.tune.truth_source = parse_truth_source(value);
    else if (key == "tune.quantile") c.tune.quantile = to_bool(key, value);
    else if (key == "two_round") c.two_round = to_bool(key, value);
    else if (key == "round1.S") c.round1.draws = to_count(key, value);
    else if (key == "round1.bandwidth") c.round1.bandwidth = BandwidthRule::parse(value);
    else if (key == "round1.order") c.round1.order = static_cast<int>(to_integer(key, value));
    else if (key == "round2.scale") c.round1.scale = to_doubles(key, value);
    else if (key == "report.timings") c.report_timings = to_bool(key, value);
    else if (key == "output.path") c.output_path = value;
    else if (key == "output.format") c.output_format = value;
  }
  return c;
}

std::string ExperimentConfig::serialize() const {
  const auto m = to_map();
  std::ostringstream os;
  for (const auto& key : key_order()) {
    auto it = m.find(key);
    if (it != m.end()) os << key << " = " << it->second << '\n';
    if (key == "model") {
      for (const auto& [k, v] : model_params) os << "model." << k << " = " << v << '\n';
    }
  }
  return os.str();
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) { return from_map(parse_entries(text)); }

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

ExperimentConfig apply_overrides(const ExperimentConfig& base, const std::vector<std::string>& overrides) {
  auto entries = base.to_map();
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ValidationError("override '" + o + "' is not key=value");
    const std::string key = trim(o.substr(0, eq));
    if (key.empty()) throw ValidationError("override '" + o + "' has an empty key");
    entries[key] = trim(o.substr(eq + 1));
  }
  return ExperimentConfig::from_map(entries);
}

void ExperimentConfig::validate() const {
  if (model.empty()) throw ValidationError("model name is empty");
  if (weight_policy != "model" && weight_policy != "identity" && weight_policy != "two_step" &&
      weight_policy != "continuous_updating") {
    throw ValidationError("unknown weight_policy '" + weight_policy + "'");
  }
  if (prior.kind != "default" && prior.kind != "uniform_box" && prior.kind != "normal") {
    throw ValidationError("unknown prior kind '" + prior.kind + "'");
  }
  if (draws < 1) throw ValidationError("S must be at least 1");
  if (replications < 1) throw ValidationError("replications must be at least 1");
  if (workers < 1) throw ValidationError("workers must be at least 1");
  if (orders.empty()) throw ValidationError("orders must list at least one polynomial order");
  auto check_order = [](int p) {
    if (p < 0 || p > kMaxPolynomialDegree) {
      throw ValidationError("polynomial order " + std::to_string(p) + " outside [0, " +
                            std::to_string(kMaxPolynomialDegree) + "]");
    }
  };
  for (int p : orders) check_order(p);
  if (quantile_order) check_order(*quantile_order);
  if (!(ci_level >= 0.0 && ci_level < 1.0)) throw ValidationError("ci_level must lie in [0, 1)");
  for (double t : quantile_levels) {
    if (!(t > 0.0 && t < 1.0)) throw ValidationError("quantile levels must lie in (0, 1)");
  }
  if (!(ridge >= 0.0)) throw ValidationError("ridge must be nonnegative");
  if (!(max_condition > 1.0)) throw ValidationError("max_condition must exceed 1");
  if (!(failure_threshold >= 0.0 && failure_threshold <= 1.0)) {
    throw ValidationError("failure_threshold must lie in [0, 1]");
  }
  bandwidth.validate(draws);
  if (quantile_bandwidth) {
    if (quantile_bandwidth->mode == BandwidthMode::tuned) {
      throw ValidationError("quantile_bandwidth cannot be 'tuned'; set bandwidth = tuned instead");
    }
    quantile_bandwidth->validate(draws);
  }
  if (bandwidth.mode == BandwidthMode::tuned) {
    if (tune.grid.empty()) throw ValidationError("bandwidth = tuned needs a nonempty tune.grid");
    if (tune.trials < 1) throw ValidationError("tune.trials must be at least 1");
  }
  for (const auto& g : tune.grid) {
    if (g.mode == BandwidthMode::tuned) throw ValidationError("tune.grid entries must be fixed or nn rules");
    g.validate(draws);
  }
  if (two_round) {
    if (round1.draws < 1) throw ValidationError("round1.S must be at least 1");
    if (round1.bandwidth.mode == BandwidthMode::tuned) throw ValidationError("round1.bandwidth cannot be tuned");
    round1.bandwidth.validate(round1.draws);
    check_order(round1.order);
    if (round1.scale.empty()) throw ValidationError("two_round needs round2.scale");
    for (double s : round1.scale) {
      if (!(s > 0.0)) throw ValidationError("round2.scale entries must be positive");
    }
    if (estimator == EstimatorKind::sl_gmm) throw ValidationError("two_round is not available for sl_gmm");
  }
  if (output_format != "csv" && output_format != "json") {
    throw ValidationError("output.format must be csv or json");
  }
}

std::size_t basis_size(int dim, int order, bool omit_cross_products) {
  if (omit_cross_products) return static_cast<std::size_t>(dim) * static_cast<std::size_t>(order) + 1;
  double c = 1.0;
  for (int i = 1; i <= order; ++i) c = c * (dim + i) / i;
  return static_cast<std::size_t>(std::llround(c));
}

std::vector<std::string> rate_warnings(const ExperimentConfig& config, int k, int d, std::size_t n) {
  std::vector<std::string> out;
  std::vector<int> all = config.orders;
  if (config.quantile_order) all.push_back(*config.quantile_order);
  if (config.two_round) all.push_back(config.round1.order);
  for (int p : all) {
    const std::size_t need = basis_size(d, p, config.omit_cross_products);
    if (p >= 1 && config.draws < need) {
      throw ValidationError("S = " + std::to_string(config.draws) + " is below the basis size " +
                            std::to_string(need) + " for order " + std::to_string(p));
    }
    const double bound = std::pow(static_cast<double>(n), static_cast<double>(k) / (2.0 * (p + 1)));
    if (static_cast<double>(config.draws) < bound) {
      std::ostringstream os;
      os << "S = " << config.draws << " is below n^(k/(2(p+1))) = " << bound << " for p = " << p
         << " (n = " << n << ", k = " << k
         << "); the simulation-size rate condition for sqrt(n)-valid posterior quantiles is not met";
      out.push_back(os.str());
    }
  }
  return out;
}

}  // namespace simreg
