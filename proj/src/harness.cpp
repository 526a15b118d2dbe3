#include "simreg/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "simreg/errors.hpp"
#include "simreg/models.hpp"
#include "simreg/polybasis.hpp"
#include "simreg/rng.hpp"

namespace simreg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

class ParamReader {
 public:
  ParamReader(std::string model, const std::map<std::string, std::string>& params)
      : model_(std::move(model)), params_(params) {}

  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

  double number(const std::string& key, double fallback) {
    const std::string v = text(key, "");
    if (v.empty()) return fallback;
    try {
      std::size_t pos = 0;
      const double out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ValidationError("model." + key + " expects a number, got '" + v + "'");
    }
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const double v = number(key, static_cast<double>(fallback));
    if (v < 0 || v != std::floor(v)) throw ValidationError("model." + key + " expects a nonnegative integer");
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key, bool fallback) {
    const std::string v = text(key, fallback ? "true" : "false");
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError("model." + key + " expects true or false");
  }

  Eigen::VectorXd vector(const std::string& key, const Eigen::VectorXd& fallback) {
    const std::string v = text(key, "");
    if (v.empty()) return fallback;
    std::vector<double> values;
    std::istringstream is(v);
    std::string item;
    while (std::getline(is, item, ',')) {
      try {
        values.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw ValidationError("model." + key + " has a non-numeric entry '" + item + "'");
      }
    }
    return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  }

  void finish() const {
    for (const auto& [k, v] : params_) {
      if (!used_.count(k)) throw ValidationError("model '" + model_ + "' has no parameter '" + k + "'");
    }
  }

 private:
  std::string model_;
  const std::map<std::string, std::string>& params_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Registered models
// ---------------------------------------------------------------------------

class NormalMeansAdapter final : public Model {
 public:
  explicit NormalMeansAdapter(const std::map<std::string, std::string>& params) {
    ParamReader r("normal_means", params);
    const auto n = r.count("n", 100);
    const int d = static_cast<int>(r.count("d", 1));
    const bool over = r.flag("overidentified", false);
    if (d < 1) throw ValidationError("model.d must be at least 1");
    Eigen::VectorXd sig = r.vector("sigma", Eigen::VectorXd::Ones(d));
    Eigen::MatrixXd sigma;
    if (sig.size() == d) {
      sigma = sig.asDiagonal();
    } else if (sig.size() == d * d) {
      sigma = Eigen::Map<Eigen::MatrixXd>(sig.data(), d, d).transpose();
    } else {
      throw ValidationError("model.sigma needs d diagonal entries or d*d row-major entries");
    }
    const int k = over ? 1 : d;
    mu_ = r.vector("mu", Eigen::VectorXd::Zero(k));
    if (mu_.size() != k) throw ValidationError("model.mu needs " + std::to_string(k) + " entries");
    r.finish();
    if (over) {
      model_ = NormalMeansModel::overidentified(d, 0.0, 1.0, sigma, n);
    } else {
      model_ = NormalMeansModel::exact(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d), sigma, n);
    }
  }

  std::string name() const override { return "normal_means"; }
  int param_dim() const override { return model_.k; }
  int statistic_dim() const override { return model_.d; }
  std::size_t sample_size() const override { return model_.n; }
  std::vector<std::string> parameter_names() const override {
    if (model_.k == 1) return {"mu"};
    std::vector<std::string> out;
    for (int j = 0; j < model_.k; ++j) out.push_back("mu" + std::to_string(j + 1));
    return out;
  }
  Eigen::VectorXd true_parameter() const override { return mu_; }
  Prior default_prior() const override { return model_.prior(); }
  bool supports(EstimatorKind) const override { return true; }

  ProblemInstance generate(const Eigen::VectorXd& theta, std::uint64_t seed) const override {
    const Eigen::VectorXd xbar = model_.generate_mean(theta, seed);
    ProblemInstance out;
    out.gmm = model_.gmm_problem(xbar);
    out.bil = model_.bil_problem(xbar);
    const auto names = parameter_names();
    out.gmm->functionals = coordinate_functionals(model_.k, names);
    out.bil->functionals = coordinate_functionals(model_.k, names);
    return out;
  }

 private:
  NormalMeansModel model_;
  Eigen::VectorXd mu_;
};

class QuantileIvAdapter final : public Model {
 public:
  explicit QuantileIvAdapter(const std::map<std::string, std::string>& params) {
    ParamReader r("quantile_iv", params);
    model_.n = r.count("n", 200);
    model_.tau = r.number("tau", 0.5);
    const Eigen::VectorXd alpha = r.vector("alpha", Eigen::Vector3d::Constant(0.2));
    const Eigen::VectorXd beta = r.vector("beta", Eigen::Vector2d::Ones());
    if (alpha.size() != 3) throw ValidationError("model.alpha needs 3 entries");
    if (beta.size() != 2) throw ValidationError("model.beta needs 2 entries");
    model_.alpha = alpha;
    model_.beta = beta;
    weight_ = parse_iv_weight(r.text("weight", "optimal"));
    const std::string data = r.text("data", "");
    r.finish();
    model_.validate();
    if (!data.empty()) {
      std::ifstream in(data);
      if (!in) throw ValidationError("cannot open dataset '" + data + "'");
      fixed_ = IvDataset::read_csv(in);
      model_.n = fixed_->size();
    }
  }

  std::string name() const override { return "quantile_iv"; }
  int param_dim() const override { return 2; }
  int statistic_dim() const override { return 3; }
  std::size_t sample_size() const override { return model_.n; }
  std::vector<std::string> parameter_names() const override { return {"beta1", "beta2"}; }
  Eigen::VectorXd true_parameter() const override { return model_.beta; }
  Prior default_prior() const override {
    return Prior::uniform_box(Eigen::Vector2d::Zero(), Eigen::Vector2d::Constant(3.0));
  }
  bool supports(EstimatorKind kind) const override { return kind != EstimatorKind::bil; }
  std::optional<std::string> baseline_name() const override { return std::string("IV"); }

  ProblemInstance generate(const Eigen::VectorXd& theta, std::uint64_t seed) const override {
    IvDataset data;
    if (fixed_) {
      data = *fixed_;
    } else {
      QuantileIvModel m = model_;
      m.beta = theta;
      data = quantile_iv_generate(m, seed);
    }
    ProblemInstance out;
    out.gmm = quantile_iv_problem(data, model_.tau, weight_);
    const IvEstimate iv = iv_baseline(data);
    out.baseline = BaselineEstimate{"IV", iv.beta, iv.std_error};
    return out;
  }

 private:
  QuantileIvModel model_;
  IvWeight weight_ = IvWeight::optimal;
  std::optional<IvDataset> fixed_;
};

class ToyLocationScaleAdapter final : public Model {
 public:
  explicit ToyLocationScaleAdapter(const std::map<std::string, std::string>& params) {
    ParamReader r("toy_location_scale", params);
    model_.n = r.count("n", 100);
    model_.mu = r.number("mu", 0.0);
    model_.sigma = r.number("sigma", 1.0);
    r.finish();
    model_.validate();
  }

  std::string name() const override { return "toy_location_scale"; }
  int param_dim() const override { return 2; }
  int statistic_dim() const override { return 2; }
  std::size_t sample_size() const override { return model_.n; }
  std::vector<std::string> parameter_names() const override { return {"mu", "sigma"}; }
  Eigen::VectorXd true_parameter() const override { return Eigen::Vector2d(model_.mu, model_.sigma); }
  Prior default_prior() const override {
    return Prior::uniform_box(Eigen::Vector2d(-2.0, 0.25), Eigen::Vector2d(2.0, 3.0));
  }
  bool supports(EstimatorKind kind) const override { return kind == EstimatorKind::bil; }

  ProblemInstance generate(const Eigen::VectorXd& theta, std::uint64_t seed) const override {
    ToyLocationScaleModel m = model_;
    m.mu = theta[0];
    m.sigma = theta[1];
    const Eigen::Vector2d observed = toy_location_scale_simulate(m, m.n, derive_seed(seed, stream::data));
    ProblemInstance out;
    out.bil = toy_bil_problem(observed, m.n);
    return out;
  }

 private:
  ToyLocationScaleModel model_;
};

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct Variant {
  std::string label;
  int order = -1;  // -1 for SL-GMM
};

struct Context {
  ExperimentConfig config;
  std::unique_ptr<Model> model;
  std::optional<Prior> prior;
  std::vector<Variant> variants;
  std::optional<Kernel> kernel;
  std::vector<MultiIndexSet> bases;  // per variant; unused entry for SL
  std::optional<MultiIndexSet> quantile_basis;
  std::optional<MultiIndexSet> round1_basis;
  std::vector<std::string> names;
  std::optional<std::string> baseline;
  std::size_t n = 0;
  std::vector<std::string> warnings;
};

Context make_context(const ExperimentConfig& config) {
  config.validate();
  Context ctx;
  ctx.config = config;
  ctx.model = make_model(config.model, config.model_params);
  if (!ctx.model->supports(config.estimator)) {
    throw ValidationError("model '" + config.model + "' does not support estimator '" + to_string(config.estimator) +
                          "'");
  }
  ctx.prior = resolve_prior(config, *ctx.model);
  const int d = ctx.model->statistic_dim();
  const int k = ctx.model->param_dim();
  ctx.n = ctx.model->sample_size();
  ctx.names = ctx.model->parameter_names();
  ctx.kernel.emplace(config.kernel, d);
  if (config.estimator == EstimatorKind::sl_gmm) {
    if (config.bandwidth.mode == BandwidthMode::tuned) throw ValidationError("sl_gmm has no bandwidth to tune");
    ctx.variants.push_back({"SL", -1});
    ctx.bases.push_back(build_index_set(d, 0, false));
  } else {
    std::set<int> seen;
    for (int p : config.orders) {
      if (!seen.insert(p).second) throw ValidationError("orders lists " + std::to_string(p) + " twice");
      ctx.variants.push_back({variant_name(p), p});
      ctx.bases.push_back(build_index_set(d, p, config.omit_cross_products));
    }
    ctx.warnings = rate_warnings(config, k, d, ctx.n);
  }
  if (config.quantile_order) ctx.quantile_basis = build_index_set(d, *config.quantile_order, config.omit_cross_products);
  if (config.two_round || config.weight_policy == "two_step") {
    ctx.round1_basis = build_index_set(d, config.round1.order, config.omit_cross_products);
  }
  if (config.two_round && static_cast<int>(config.round1.scale.size()) != k) {
    throw ValidationError("round2.scale needs " + std::to_string(k) + " entries");
  }
  if (config.weight_policy != "model" && config.estimator == EstimatorKind::bil) {
    throw ValidationError("weight_policy applies to GMM estimators only");
  }
  if (config.baseline) ctx.baseline = ctx.model->baseline_name();
  return ctx;
}

DrawBatch draw_parameters(const Context& ctx, std::size_t count, std::uint64_t seed) {
  if (ctx.config.quasi_random) {
    DrawBatch b = sample_prior_quasi(*ctx.prior, count);
    b.seed = seed;
    return b;
  }
  return sample_prior(*ctx.prior, count, seed);
}

EstimateOptions estimate_options(const Context& ctx) {
  EstimateOptions o;
  o.ci_level = ctx.config.ci_level;
  o.quantile_levels = ctx.config.quantile_levels;
  o.quantile_basis = ctx.quantile_basis;
  o.mean.max_condition = ctx.config.max_condition;
  o.mean.ridge = ctx.config.ridge;
  o.quantile.max_condition = ctx.config.max_condition;
  if (ctx.config.ci_level > 0.0 && ctx.config.simulation_size > ctx.n) o.quantile_levels.push_back(0.5);
  return o;
}

EstimateRow make_row(const Context& ctx, const std::string& label, const std::string& name, double truth,
                     const PosteriorSummary& s) {
  EstimateRow row;
  row.estimator = label;
  row.parameter = name;
  row.truth = truth;
  row.estimate = s.point_estimate;
  if (ctx.config.ci_level > 0.0) {
    row.has_interval = true;
    Interval iv = s.interval;
    if (ctx.config.estimator == EstimatorKind::abc_gmm && ctx.config.simulation_size > ctx.n) {
      iv = rescale_interval(s, ctx.config.simulation_size, ctx.n, ctx.config.ci_level);
    }
    row.lower = iv.lower;
    row.upper = iv.upper;
  }
  row.bandwidth = s.bandwidth;
  row.quantile_bandwidth = s.quantile_bandwidth;
  row.active_count = s.active_count;
  row.effective_weight = s.effective_weight;
  return row;
}

struct Prepared {
  RegressorBatch batch;
  Eigen::VectorXd truth;  // functional values at the true parameter
  std::vector<EstimateRow> round1_rows;
  std::optional<Eigen::VectorXd> sl_estimate;
  std::optional<BaselineEstimate> baseline;
  std::size_t dropped = 0;
};

RegressorBatch regressors(const Context& ctx, const ProblemInstance& inst, const GmmProblem* gmm,
                          const DrawBatch& draws, std::uint64_t noise_seed) {
  if (ctx.config.estimator == EstimatorKind::bil) {
    BilProblem p = *inst.bil;
    if (ctx.config.simulation_size > 0) p.m = ctx.config.simulation_size;
    return bil_regressors(p, draws);
  }
  const std::size_t m = ctx.config.simulation_size > 0 ? ctx.config.simulation_size : gmm->n;
  return gmm_regressors(*gmm, draws, m, noise_seed, ctx.config.noise);
}

Eigen::VectorXd coarse_estimate(const Context& ctx, const RegressorBatch& batch, std::vector<EstimateRow>* rows,
                                const Eigen::VectorXd& truth) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(batch.names.size()));
  EstimateOptions o = estimate_options(ctx);
  if (!rows) {
    o.ci_level = 0.0;
    o.quantile_levels.clear();
  }
  o.quantile_basis = std::nullopt;
  for (std::size_t j = 0; j < batch.names.size(); ++j) {
    const PosteriorSummary s = estimate(batch.sample(j), *ctx.kernel, ctx.config.round1.bandwidth,
                                        *ctx.round1_basis, o);
    out[static_cast<Eigen::Index>(j)] = s.point_estimate;
    if (rows) rows->push_back(make_row(ctx, "R1", batch.names[j], truth[static_cast<Eigen::Index>(j)], s));
  }
  return out;
}

GmmProblem apply_weight_policy(const Context& ctx, const ProblemInstance& inst, std::uint64_t seed) {
  GmmProblem p = *inst.gmm;
  const std::string& policy = ctx.config.weight_policy;
  if (policy == "model") return p;
  if (policy == "identity") {
    p.policy = WeightPolicy::identity;
    return p;
  }
  if (!p.covariance) throw ValidationError("model has no covariance estimator for weight_policy " + policy);
  if (policy == "continuous_updating") {
    p.policy = WeightPolicy::continuous_updating;
    return p;
  }
  // two_step: identity-weight pilot pass with the round-1 rule.
  GmmProblem pilot = p;
  pilot.policy = WeightPolicy::identity;
  const DrawBatch draws = draw_parameters(ctx, ctx.config.draws, derive_seed(seed, {stream::draws, 1}));
  const RegressorBatch batch = regressors(ctx, inst, &pilot, draws, derive_seed(seed, {stream::noise, 1}));
  const Eigen::VectorXd theta0 = coarse_estimate(ctx, batch, nullptr, Eigen::VectorXd());
  return with_two_step_weight(p, theta0);
}

Prepared prepare(const Context& ctx, const Eigen::VectorXd& theta, std::uint64_t seed) {
  const ProblemInstance inst = ctx.model->generate(theta, seed);
  Prepared out;
  out.baseline = inst.baseline;
  const std::vector<Functional>& functionals =
      ctx.config.estimator == EstimatorKind::bil ? inst.bil->functionals : inst.gmm->functionals;
  out.truth.resize(static_cast<Eigen::Index>(functionals.size()));
  for (std::size_t j = 0; j < functionals.size(); ++j) out.truth[static_cast<Eigen::Index>(j)] = functionals[j].eval(theta);

  std::optional<GmmProblem> gmm;
  if (ctx.config.estimator != EstimatorKind::bil) gmm = apply_weight_policy(ctx, inst, seed);

  if (ctx.config.estimator == EstimatorKind::sl_gmm) {
    const DrawBatch draws = draw_parameters(ctx, ctx.config.draws, derive_seed(seed, stream::draws));
    out.sl_estimate = sl_gmm_estimate(*gmm, draws);
    out.batch.names.clear();
    for (const auto& f : functionals) out.batch.names.push_back(f.name);
    return out;
  }

  const GmmProblem* gp = gmm ? &*gmm : nullptr;
  if (!ctx.config.two_round) {
    const DrawBatch draws = draw_parameters(ctx, ctx.config.draws, derive_seed(seed, stream::draws));
    out.batch = regressors(ctx, inst, gp, draws, derive_seed(seed, stream::noise));
    out.dropped = draws.dropped;
    return out;
  }

  const DrawBatch first = draw_parameters(ctx, ctx.config.round1.draws, derive_seed(seed, stream::draws));
  const RegressorBatch batch1 = regressors(ctx, inst, gp, first, derive_seed(seed, stream::noise));
  const Eigen::VectorXd theta0 = coarse_estimate(ctx, batch1, &out.round1_rows, out.truth);

  const Eigen::VectorXd scale = Eigen::Map<const Eigen::VectorXd>(
      ctx.config.round1.scale.data(), static_cast<Eigen::Index>(ctx.config.round1.scale.size()));
  const Prior proposal = adaptive_proposal(theta0, scale);
  const Prior& prior = *ctx.prior;
  DrawBatch second = sample_prior(proposal, ctx.config.draws, derive_seed(seed, stream::round2));
  second = importance_weights(
      second, [&](const Eigen::VectorXd& t) { return proposal.density(t); },
      [&](const Eigen::VectorXd& t) { return prior.density(t); });
  out.dropped = first.dropped + second.dropped;
  out.batch = regressors(ctx, inst, gp, second, derive_seed(seed, {stream::round2, stream::noise}));
  out.batch.failures += batch1.failures;
  return out;
}

/// Estimates every variant. A variant that fails for any functional
/// contributes no rows and one failure message.
void estimate_variants(const Context& ctx, const Prepared& prep, const RuleTable& rules,
                       std::vector<EstimateRow>& rows, std::vector<std::string>& failures) {
  const EstimateOptions base = estimate_options(ctx);
  for (std::size_t v = 0; v < ctx.variants.size(); ++v) {
    const Variant& var = ctx.variants[v];
    std::vector<EstimateRow> local;
    if (var.order < 0) {
      for (std::size_t j = 0; j < prep.batch.names.size(); ++j) {
        EstimateRow row;
        row.estimator = var.label;
        row.parameter = prep.batch.names[j];
        row.truth = prep.truth[static_cast<Eigen::Index>(j)];
        row.estimate = (*prep.sl_estimate)[static_cast<Eigen::Index>(j)];
        local.push_back(row);
      }
    } else {
      try {
        for (std::size_t j = 0; j < prep.batch.names.size(); ++j) {
          EstimateOptions o = base;
          o.quantile_rule = rules[v][j].quantile;
          const PosteriorSummary s = estimate(prep.batch.sample(j), *ctx.kernel, rules[v][j].mean, ctx.bases[v], o);
          local.push_back(make_row(ctx, var.label, prep.batch.names[j], prep.truth[static_cast<Eigen::Index>(j)], s));
        }
      } catch (const std::exception& e) {
        failures.push_back(var.label + ": " + e.what());
        continue;
      }
    }
    rows.insert(rows.end(), local.begin(), local.end());
  }
  if (ctx.baseline && prep.baseline) {
    const BaselineEstimate& b = *prep.baseline;
    const double level = ctx.config.ci_level;
    const double z = level > 0.0 ? boost::math::quantile(boost::math::normal(), 0.5 + 0.5 * level) : 0.0;
    for (std::size_t j = 0; j < prep.batch.names.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      EstimateRow row;
      row.estimator = b.name;
      row.parameter = prep.batch.names[j];
      row.truth = prep.truth[jj];
      row.estimate = b.estimate[jj];
      if (level > 0.0) {
        row.has_interval = true;
        row.lower = b.estimate[jj] - z * b.std_error[jj];
        row.upper = b.estimate[jj] + z * b.std_error[jj];
      }
      rows.push_back(row);
    }
  }
}

RuleTable fixed_rules(const Context& ctx) {
  const BandwidthRule q = ctx.config.quantile_bandwidth ? *ctx.config.quantile_bandwidth : ctx.config.bandwidth;
  return RuleTable(ctx.variants.size(), std::vector<RulePair>(ctx.names.size(), RulePair{ctx.config.bandwidth, q}));
}

/// Runs f(i) for i in [0, count). Indices run concurrently on `workers`
/// threads when there are enough of them; otherwise serially with the
/// workers available to inner parallel loops. f must not throw.
template <class F>
void for_each_index(std::size_t count, int workers, F&& f) {
  const auto total = static_cast<long long>(count);
  if (workers > 1 && count >= static_cast<std::size_t>(workers)) {
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
    for (long long i = 0; i < total; ++i) f(static_cast<std::size_t>(i));
    return;
  }
  const int previous = omp_get_max_threads();
  omp_set_num_threads(workers);
  for (long long i = 0; i < total; ++i) f(static_cast<std::size_t>(i));
  omp_set_num_threads(previous);
}

ReplicationRecord run_replication(const Context& ctx, const RuleTable& rules, std::size_t r) {
  ReplicationRecord rec;
  rec.index = r;
  try {
    const Prepared prep = prepare(ctx, ctx.model->true_parameter(), derive_seed(ctx.config.seed, r));
    rec.dropped_draws = prep.dropped;
    rec.failed_simulations = prep.batch.failures;
    rec.rows = prep.round1_rows;
    estimate_variants(ctx, prep, rules, rec.rows, rec.failures);
  } catch (const std::exception& e) {
    rec.rows.clear();
    rec.failures.push_back(std::string("replication: ") + e.what());
  }
  return rec;
}

std::vector<VariantInfo> variant_infos(const Context& ctx) {
  std::vector<VariantInfo> out;
  if (ctx.config.two_round) {
    out.push_back({"R1", static_cast<double>(ctx.config.round1.order), static_cast<double>(ctx.config.round1.draws)});
  }
  for (const auto& v : ctx.variants) {
    out.push_back({v.label, v.order < 0 ? kNaN : static_cast<double>(v.order), static_cast<double>(ctx.config.draws)});
  }
  if (ctx.baseline) out.push_back({*ctx.baseline, kNaN, kNaN});
  return out;
}

std::map<std::string, std::string> report_config(const ExperimentConfig& config) {
  auto m = config.to_map();
  // Execution settings that must not change the report bytes.
  for (const char* key : {"workers", "output.path", "output.format", "report.timings"}) m.erase(key);
  return m;
}

TuningResult tune_with_context(const Context& ctx, const std::vector<BandwidthRule>& grid, TruthSource truth_source,
                               std::size_t trials) {
  if (grid.empty()) throw ValidationError("tuning grid is empty");
  if (trials < 1) throw ValidationError("tuning needs at least one trial");
  for (const auto& g : grid) {
    if (g.mode == BandwidthMode::tuned) throw ValidationError("tuning grid entries must be fixed or nn rules");
  }
  const ExperimentConfig& config = ctx.config;
  const std::size_t nv = ctx.variants.size();
  const std::size_t nj = ctx.names.size();
  const std::size_t ng = grid.size();
  const int workers = config.workers;

  std::vector<Eigen::VectorXd> truths(trials);
  if (truth_source == TruthSource::prior_draws) {
    for (std::size_t t = 0; t < trials; ++t) {
      DrawEngine engine(derive_seed(config.seed, {stream::tuning, 0, t}));
      truths[t] = ctx.prior->sample(engine);
    }
  } else {
    // Pilot replications at the model's true parameter with the middle
    // candidate; their point estimates become the trial truths.
    const BandwidthRule mid = grid[ng / 2];
    const RuleTable pilot_rules(nv, std::vector<RulePair>(nj, RulePair{mid, mid}));
    std::vector<std::optional<Eigen::VectorXd>> pilots(trials);
    for_each_index(trials, workers, [&](std::size_t t) {
      try {
        const Prepared prep = prepare(ctx, ctx.model->true_parameter(), derive_seed(config.seed, {stream::tuning, 1, t}));
        std::vector<EstimateRow> rows;
        std::vector<std::string> failures;
        estimate_variants(ctx, prep, pilot_rules, rows, failures);
        Eigen::VectorXd est(static_cast<Eigen::Index>(nj));
        std::size_t filled = 0;
        for (const auto& row : rows) {
          if (row.estimator != ctx.variants[0].label) continue;
          est[static_cast<Eigen::Index>(filled++)] = row.estimate;
        }
        if (filled == nj && ctx.prior->contains(est)) pilots[t] = est;
      } catch (const std::exception&) {
      }
    });
    std::vector<Eigen::VectorXd> ok;
    for (const auto& p : pilots) {
      if (p) ok.push_back(*p);
    }
    if (ok.empty()) throw EstimationError("every pilot estimate for estimate-centered tuning failed");
    for (std::size_t t = 0; t < trials; ++t) truths[t] = ok[t % ok.size()];
  }

  struct Cell {
    bool ok = false;
    double sq_error = 0.0;
    bool covered = false;
    double width = 0.0;
  };
  // cells[t][(v * nj + j) * ng + g]
  std::vector<std::vector<Cell>> cells(trials, std::vector<Cell>(nv * nj * ng));
  const EstimateOptions base = estimate_options(ctx);
  for_each_index(trials, workers, [&](std::size_t t) {
    try {
      const Prepared prep = prepare(ctx, truths[t], derive_seed(config.seed, {stream::tuning, 2, t}));
      for (std::size_t v = 0; v < nv; ++v) {
        for (std::size_t j = 0; j < nj; ++j) {
          const RegressionSample sample = prep.batch.sample(j);
          for (std::size_t g = 0; g < ng; ++g) {
            Cell& c = cells[t][(v * nj + j) * ng + g];
            try {
              EstimateOptions o = base;
              o.quantile_rule = grid[g];
              const PosteriorSummary s = estimate(sample, *ctx.kernel, grid[g], ctx.bases[v], o);
              const EstimateRow row = make_row(ctx, "", "", prep.truth[static_cast<Eigen::Index>(j)], s);
              c.ok = true;
              c.sq_error = (row.estimate - row.truth) * (row.estimate - row.truth);
              c.covered = row.covers();
              c.width = row.upper - row.lower;
            } catch (const std::exception&) {
              c.ok = false;
            }
          }
        }
      }
    } catch (const std::exception&) {
    }
  });

  TuningResult out;
  out.rules = fixed_rules(ctx);
  const auto allowed_failures = static_cast<std::size_t>(std::floor(config.failure_threshold * trials));
  const bool tune_quantile = config.tune.quantile && config.ci_level > 0.0;
  for (std::size_t v = 0; v < nv; ++v) {
    for (std::size_t j = 0; j < nj; ++j) {
      std::optional<std::size_t> best_mean, best_q;
      double best_mse = 0.0, best_gap = 0.0, best_width = 0.0, best_cov = 0.0;
      for (std::size_t g = 0; g < ng; ++g) {
        std::size_t ok = 0, covered = 0;
        double sse = 0.0, width = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
          const Cell& c = cells[t][(v * nj + j) * ng + g];
          if (!c.ok) continue;
          ++ok;
          sse += c.sq_error;
          covered += c.covered ? 1 : 0;
          width += c.width;
        }
        if (ok == 0 || trials - ok > allowed_failures) continue;
        const double mse = sse / static_cast<double>(ok);
        const double cov = static_cast<double>(covered) / static_cast<double>(ok);
        const double gap = std::abs(cov - config.ci_level);
        const double w = width / static_cast<double>(ok);
        if (!best_mean || mse < best_mse) {
          best_mean = g;
          best_mse = mse;
        }
        if (!best_q || gap < best_gap || (gap == best_gap && w < best_width)) {
          best_q = g;
          best_gap = gap;
          best_width = w;
          best_cov = cov;
        }
      }
      if (!best_mean) {
        throw EstimationError("all bandwidth candidates failed for " + ctx.variants[v].label + " " + ctx.names[j]);
      }
      RulePair& pair = out.rules[v][j];
      pair.mean = grid[*best_mean];
      if (tune_quantile) {
        pair.quantile = grid[*best_q];
      } else {
        pair.quantile = config.quantile_bandwidth ? *config.quantile_bandwidth : pair.mean;
      }
      TunedBandwidth sel;
      sel.estimator = ctx.variants[v].label;
      sel.parameter = ctx.names[j];
      sel.mean_rule = pair.mean.to_string();
      sel.quantile_rule = pair.quantile.to_string();
      sel.mean_mse = best_mse;
      sel.coverage = tune_quantile ? best_cov : kNaN;
      out.selected.push_back(sel);
    }
  }
  return out;
}

MonteCarloReport run_with_context(const Context& ctx, const std::string& command) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig& config = ctx.config;
  MonteCarloReport report;
  report.command = command;
  report.config = report_config(config);
  report.warnings = ctx.warnings;

  RuleTable rules = fixed_rules(ctx);
  if (config.bandwidth.mode == BandwidthMode::tuned) {
    TuningResult tuned = tune_with_context(ctx, config.tune.grid, config.tune.truth_source, config.tune.trials);
    rules = std::move(tuned.rules);
    report.tuning = std::move(tuned.selected);
  }

  report.replications.resize(config.replications);
  for_each_index(config.replications, config.workers,
                 [&](std::size_t r) { report.replications[r] = run_replication(ctx, rules, r); });
  for (const auto& rec : report.replications) report.failed_replications += rec.failed() ? 1 : 0;
  report.summary = aggregate(report.replications, variant_infos(ctx), ctx.names, config.ci_level, ctx.n);
  if (config.report_timings) {
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return report;
}

}  // namespace

std::unique_ptr<Model> make_model(const std::string& name, const std::map<std::string, std::string>& params) {
  if (name == "normal_means") return std::make_unique<NormalMeansAdapter>(params);
  if (name == "quantile_iv") return std::make_unique<QuantileIvAdapter>(params);
  if (name == "toy_location_scale") return std::make_unique<ToyLocationScaleAdapter>(params);
  throw ValidationError("unknown model '" + name + "'");
}

std::vector<std::string> registered_models() { return {"normal_means", "quantile_iv", "toy_location_scale"}; }

Prior resolve_prior(const ExperimentConfig& config, const Model& model) {
  const PriorConfig& pc = config.prior;
  const int k = model.param_dim();
  auto vec = [k](const std::vector<double>& v, const char* what) {
    if (static_cast<int>(v.size()) != k) {
      throw ValidationError(std::string("prior.") + what + " needs " + std::to_string(k) + " entries");
    }
    return Eigen::Map<const Eigen::VectorXd>(v.data(), k).eval();
  };
  if (pc.kind == "default") return model.default_prior();
  if (pc.kind == "uniform_box") return Prior::uniform_box(vec(pc.lower, "lower"), vec(pc.upper, "upper"));
  if (pc.kind == "normal") {
    const Eigen::VectorXd mean = vec(pc.mean, "mean");
    Eigen::MatrixXd cov;
    if (static_cast<int>(pc.cov.size()) == k) {
      cov = Eigen::Map<const Eigen::VectorXd>(pc.cov.data(), k).asDiagonal();
    } else if (static_cast<int>(pc.cov.size()) == k * k) {
      cov = Eigen::Map<const Eigen::MatrixXd>(pc.cov.data(), k, k).transpose();
    } else {
      throw ValidationError("prior.cov needs k diagonal entries or k*k row-major entries");
    }
    return Prior::normal(mean, cov);
  }
  throw ValidationError("unknown prior kind '" + pc.kind + "'");
}

std::string variant_name(int order) {
  switch (order) {
    case 0:
      return "LC";
    case 1:
      return "LL";
    case 2:
      return "LQ";
    default:
      return "LP" + std::to_string(order);
  }
}

std::vector<SummaryRow> aggregate(const std::vector<ReplicationRecord>& replications,
                                  const std::vector<VariantInfo>& variants,
                                  const std::vector<std::string>& parameters, double level, std::size_t n) {
  std::vector<SummaryRow> out;
  for (const auto& var : variants) {
    for (const auto& name : parameters) {
      SummaryRow row;
      row.parameter = name;
      row.estimator = var.label;
      row.level = level;
      row.n = n;
      row.draws = var.draws;
      row.p = var.order;
      double err = 0.0, sq = 0.0, h = 0.0;
      std::size_t count = 0, covered = 0, with_interval = 0;
      for (const auto& rec : replications) {
        for (const auto& r : rec.rows) {
          if (r.estimator != var.label || r.parameter != name) continue;
          const double e = r.estimate - r.truth;
          err += e;
          sq += e * e;
          h += r.bandwidth;
          ++count;
          if (r.has_interval) {
            ++with_interval;
            covered += r.covers() ? 1 : 0;
          }
          break;
        }
      }
      row.replications = count;
      row.failures = replications.size() - count;
      if (count == 0) {
        row.bias = row.rmse = row.coverage = row.h = kNaN;
      } else {
        const double c = static_cast<double>(count);
        row.bias = err / c;
        row.rmse = std::sqrt(sq / c);
        row.coverage = with_interval == count ? static_cast<double>(covered) / c : kNaN;
        row.h = std::isnan(var.order) ? kNaN : h / c;
      }
      out.push_back(row);
    }
  }
  return out;
}

TuningResult tune_bandwidth(const ExperimentConfig& config, const std::vector<BandwidthRule>& grid,
                            TruthSource truth_source, std::size_t trials) {
  const Context ctx = make_context(config);
  return tune_with_context(ctx, grid, truth_source, trials);
}

MonteCarloReport run_experiment(const ExperimentConfig& config) {
  const Context ctx = make_context(config);
  return run_with_context(ctx, config.two_round ? "tworound" : "montecarlo");
}

MonteCarloReport run_two_round(const ExperimentConfig& config) {
  ExperimentConfig c = config;
  c.two_round = true;
  return run_experiment(c);
}

}  // namespace simreg
