#include "simreg/models.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <vector>

#include "simreg/errors.hpp"
#include "simreg/rng.hpp"

namespace simreg {

namespace {

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw ValidationError(std::string(what) + " is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
}

Eigen::VectorXd standard_normals(DrawEngine& engine, Eigen::Index count) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(count);
  for (Eigen::Index i = 0; i < count; ++i) z[i] = normal(engine);
  return z;
}

}  // namespace

NormalMeansModel NormalMeansModel::exact(Eigen::VectorXd prior_mean, Eigen::MatrixXd prior_cov,
                                         Eigen::MatrixXd sigma, std::size_t n) {
  NormalMeansModel m;
  m.d = static_cast<int>(sigma.rows());
  m.k = m.d;
  m.sigma = std::move(sigma);
  m.prior_mean = std::move(prior_mean);
  m.prior_cov = std::move(prior_cov);
  m.n = n;
  m.validate();
  return m;
}

NormalMeansModel NormalMeansModel::overidentified(int d, double u0, double sigma0_sq,
                                                  Eigen::MatrixXd sigma, std::size_t n) {
  if (!(sigma0_sq > 0.0)) throw ValidationError("prior variance must be positive");
  NormalMeansModel m;
  m.d = d;
  m.k = 1;
  m.sigma = std::move(sigma);
  m.prior_mean = Eigen::VectorXd::Constant(1, u0);
  m.prior_cov = Eigen::MatrixXd::Constant(1, 1, sigma0_sq);
  m.n = n;
  m.validate();
  return m;
}

void NormalMeansModel::validate() const {
  if (d < 1 || k < 1) throw ValidationError("normal means dimensions must be positive");
  if (k != d && k != 1) throw ValidationError("normal means model needs k = d or k = 1");
  if (n < 1) throw ValidationError("sample size must be at least 1");
  if (sigma.rows() != d || sigma.cols() != d) throw ValidationError("Sigma has the wrong shape");
  if (prior_mean.size() != k || prior_cov.rows() != k || prior_cov.cols() != k) {
    throw ValidationError("prior moments have the wrong shape");
  }
  if (!sigma.isApprox(sigma.transpose(), 1e-12)) throw ValidationError("Sigma must be symmetric");
  spd_inverse(sigma, "Sigma");
  Eigen::LLT<Eigen::MatrixXd> llt(prior_cov);
  if (llt.info() != Eigen::Success) {
    throw ValidationError("prior covariance must be full rank in the supported parameterizations");
  }
}

Eigen::MatrixXd NormalMeansModel::loading() const {
  if (k == d) return Eigen::MatrixXd::Identity(d, d);
  return Eigen::MatrixXd::Ones(d, 1);
}

Prior NormalMeansModel::prior() const { return Prior::normal(prior_mean, prior_cov); }

Eigen::VectorXd NormalMeansModel::generate_mean(const Eigen::VectorXd& mu, std::uint64_t seed) const {
  if (mu.size() != k) throw ValidationError("true mean has the wrong dimension");
  DrawEngine engine(derive_seed(seed, stream::data));
  const Eigen::MatrixXd root = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
  return loading() * mu + root * standard_normals(engine, d) / std::sqrt(static_cast<double>(n));
}

GmmProblem NormalMeansModel::gmm_problem(const Eigen::VectorXd& xbar) const {
  validate();
  if (xbar.size() != d) throw ValidationError("Xbar has the wrong dimension");
  GmmProblem p;
  const Eigen::MatrixXd l = loading();
  p.moments = [l, xbar](const Eigen::VectorXd& mu) -> Eigen::VectorXd { return l * mu - xbar; };
  p.moment_dim = d;
  p.param_dim = k;
  p.n = n;
  p.policy = WeightPolicy::fixed;
  p.weight = spd_inverse(sigma, "Sigma");
  const Eigen::MatrixXd s = sigma;
  p.covariance = [s](const Eigen::VectorXd&) { return s; };
  p.functionals = coordinate_functionals(k, k == 1 ? std::vector<std::string>{"mu"} : std::vector<std::string>{});
  return p;
}

BilProblem NormalMeansModel::bil_problem(const Eigen::VectorXd& xbar) const {
  validate();
  if (xbar.size() != d) throw ValidationError("Xbar has the wrong dimension");
  BilProblem p;
  const Eigen::MatrixXd l = loading();
  const Eigen::MatrixXd root = Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
  const int dim = d;
  p.simulator = [l, root, dim](const Eigen::VectorXd& mu, std::size_t m, std::uint64_t seed) -> Eigen::VectorXd {
    DrawEngine engine(seed);
    return l * mu + root * standard_normals(engine, dim) / std::sqrt(static_cast<double>(m));
  };
  p.observed = xbar;
  p.n = n;
  p.functionals = coordinate_functionals(k, k == 1 ? std::vector<std::string>{"mu"} : std::vector<std::string>{});
  return p;
}

GaussianPosterior normal_analytic_posterior(const NormalMeansModel& model, const Eigen::VectorXd& xbar,
                                            const Eigen::VectorXd& y) {
  model.validate();
  if (xbar.size() != model.d || y.size() != model.d) throw ValidationError("Xbar or y has the wrong dimension");
  const double n = static_cast<double>(model.n);
  GaussianPosterior out;
  if (!model.is_overidentified()) {
    const Eigen::MatrixXd sn = model.sigma / n;
    const Eigen::MatrixXd inv = (model.prior_cov + sn).inverse();
    out.mean = sn * inv * model.prior_mean + model.prior_cov * inv * (xbar + y);
    out.covariance = model.prior_cov * inv * sn;
    return out;
  }
  // Scalar mu with prior N(u0, s0^2) observed through Xbar + y = mu l + e,
  // e ~ N(0, Sigma / n).
  const Eigen::VectorXd l = Eigen::VectorXd::Ones(model.d);
  const Eigen::MatrixXd sinv = spd_inverse(model.sigma, "Sigma");
  const double s0 = model.prior_cov(0, 0);
  const double u0 = model.prior_mean[0];
  const double info = n * l.dot(sinv * l);
  const double precision = 1.0 / s0 + info;
  out.mean = Eigen::VectorXd::Constant(1, (u0 / s0 + n * l.dot(sinv * (xbar + y))) / precision);
  out.covariance = Eigen::MatrixXd::Constant(1, 1, s0 / (1.0 + s0 * info));
  return out;
}

double normal_gls_limit(const NormalMeansModel& model, const Eigen::VectorXd& xbar, const Eigen::VectorXd& y) {
  const Eigen::VectorXd l = Eigen::VectorXd::Ones(model.d);
  const Eigen::MatrixXd sinv = spd_inverse(model.sigma, "Sigma");
  return l.dot(sinv * (xbar + y)) / l.dot(sinv * l);
}

void QuantileIvModel::validate() const {
  if (n < 1) throw ValidationError("quantile IV sample size must be at least 1");
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
}

IvDataset quantile_iv_generate(const QuantileIvModel& model, std::uint64_t seed) {
  model.validate();
  const auto n = static_cast<Eigen::Index>(model.n);
  IvDataset data;
  data.y.resize(n);
  data.x.resize(n, 2);
  data.z.resize(n, 3);
  DrawEngine engine(derive_seed(seed, stream::data));
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi1 = normal(engine);
    const double xi2 = normal(engine);
    const double xi3 = normal(engine);
    const double xi4 = normal(engine);
    const double upsilon = normal(engine);
    data.x(i, 0) = 1.0;
    data.x(i, 1) = xi1 + xi2;
    data.z(i, 0) = 1.0;
    data.z(i, 1) = xi2 + xi3;
    data.z(i, 2) = xi1 + xi4;
    const double za = data.z.row(i).dot(model.alpha);
    const double eps = std::exp(za * za * upsilon) - 1.0;
    data.y[i] = data.x.row(i).dot(model.beta) + eps;
  }
  return data;
}

void IvDataset::write_csv(std::ostream& os) const {
  os << "y,x1,x2,z1,z2,z3\n";
  std::ostringstream line;
  line.precision(17);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    line.str("");
    line << y[i] << ',' << x(i, 0) << ',' << x(i, 1) << ',' << z(i, 0) << ',' << z(i, 1) << ',' << z(i, 2);
    os << line.str() << '\n';
  }
}

IvDataset IvDataset::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("dataset CSV is empty");
  if (line.rfind("y,x1,x2,z1,z2,z3", 0) != 0) throw ValidationError("dataset CSV has an unexpected header");
  std::vector<std::array<double, 6>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::array<double, 6> row{};
    std::istringstream ls(line);
    std::string cell;
    for (double& v : row) {
      if (!std::getline(ls, cell, ',')) throw ValidationError("dataset CSV row has fewer than 6 columns");
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw ValidationError("dataset CSV has a non-numeric cell '" + cell + "'");
      }
    }
    rows.push_back(row);
  }
  IvDataset data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  data.y.resize(n);
  data.x.resize(n, 2);
  data.z.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    data.y[i] = r[0];
    data.x.row(i) << r[1], r[2];
    data.z.row(i) << r[3], r[4], r[5];
  }
  return data;
}

Eigen::VectorXd quantile_iv_g(const IvDataset& data, const Eigen::VectorXd& beta, double tau) {
  const Eigen::Index n = data.y.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(3);
  const double b0 = beta[0];
  const double b1 = beta[1];
  for (Eigen::Index i = 0; i < n; ++i) {
    const double fit = data.x(i, 0) * b0 + data.x(i, 1) * b1;
    const double r = tau - (data.y[i] <= fit ? 1.0 : 0.0);
    g[0] += data.z(i, 0) * r;
    g[1] += data.z(i, 1) * r;
    g[2] += data.z(i, 2) * r;
  }
  return g / static_cast<double>(n);
}

Eigen::MatrixXd quantile_iv_covariance(const IvDataset& data, const Eigen::VectorXd& beta, double tau) {
  const Eigen::Index n = data.y.size();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r = tau - (data.y[i] <= data.x.row(i).dot(beta) ? 1.0 : 0.0);
    s += r * r * data.z.row(i).transpose() * data.z.row(i);
  }
  return s / static_cast<double>(n);
}

IvMoments quantile_iv_moments(const IvDataset& data, const Eigen::VectorXd& beta, double tau) {
  if (data.size() == 0) throw ValidationError("quantile IV dataset is empty");
  if (beta.size() != 2) throw ValidationError("quantile IV beta must have 2 entries");
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("quantile level must lie in (0, 1)");
  const Eigen::MatrixXd gram = data.z.transpose() * data.z / static_cast<double>(data.size());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  if (!lu.isInvertible()) throw ValidationError("instrument Gram matrix is singular");
  return {quantile_iv_g(data, beta, tau), lu.inverse()};
}

IvWeight parse_iv_weight(const std::string& name) {
  if (name == "optimal") return IvWeight::optimal;
  if (name == "instrument_gram") return IvWeight::instrument_gram;
  if (name == "identity") return IvWeight::identity;
  throw ValidationError("unknown quantile IV weight '" + name + "'");
}

std::string to_string(IvWeight weight) {
  switch (weight) {
    case IvWeight::optimal:
      return "optimal";
    case IvWeight::instrument_gram:
      return "instrument_gram";
    case IvWeight::identity:
      return "identity";
  }
  return "unknown";
}

GmmProblem quantile_iv_problem(const IvDataset& data, double tau, IvWeight weight) {
  const IvMoments base = quantile_iv_moments(data, Eigen::Vector2d::Zero(), tau);
  GmmProblem p;
  auto shared = std::make_shared<const IvDataset>(data);
  p.moments = [shared, tau](const Eigen::VectorXd& beta) { return quantile_iv_g(*shared, beta, tau); };
  p.moment_dim = 3;
  p.param_dim = 2;
  p.n = data.size();
  p.covariance = [shared, tau](const Eigen::VectorXd& beta) { return quantile_iv_covariance(*shared, beta, tau); };
  switch (weight) {
    case IvWeight::optimal:
      p.policy = WeightPolicy::fixed;
      p.weight = base.weight / (tau * (1.0 - tau));
      break;
    case IvWeight::instrument_gram:
      p.policy = WeightPolicy::fixed;
      p.weight = base.weight;
      break;
    case IvWeight::identity:
      p.policy = WeightPolicy::identity;
      break;
  }
  p.functionals = coordinate_functionals(2, {"beta1", "beta2"});
  return p;
}

IvEstimate iv_baseline(const IvDataset& data) {
  const auto& x = data.x;
  const auto& z = data.z;
  const Eigen::MatrixXd zz = z.transpose() * z;
  Eigen::FullPivLU<Eigen::MatrixXd> zz_lu(zz);
  if (!zz_lu.isInvertible()) throw ValidationError("instrument Gram matrix is singular");
  // First stage fitted regressors.
  const Eigen::MatrixXd xhat = z * zz_lu.solve(z.transpose() * x);
  const Eigen::MatrixXd a = xhat.transpose() * x;
  Eigen::FullPivLU<Eigen::MatrixXd> a_lu(a);
  if (!a_lu.isInvertible()) throw ValidationError("first stage is singular");
  IvEstimate out;
  out.beta = a_lu.solve(xhat.transpose() * data.y);

  const Eigen::VectorXd u = data.y - x * out.beta;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(x.cols(), x.cols());
  for (Eigen::Index i = 0; i < u.size(); ++i) meat += u[i] * u[i] * xhat.row(i).transpose() * xhat.row(i);
  const Eigen::MatrixXd bread = (xhat.transpose() * xhat).inverse();
  out.std_error = (bread * meat * bread).diagonal().cwiseSqrt();
  return out;
}

void ToyLocationScaleModel::validate() const {
  if (!(sigma > 0.0)) throw ValidationError("location-scale sigma must be positive");
  if (n < 2) throw ValidationError("location-scale sample size must be at least 2");
}

Eigen::Vector2d toy_location_scale_simulate(const ToyLocationScaleModel& model, std::size_t m,
                                            std::uint64_t seed) {
  if (!(model.sigma > 0.0)) throw ValidationError("location-scale sigma must be positive");
  if (m < 2) throw ValidationError("simulation size must be at least 2");
  DrawEngine engine(seed);
  std::normal_distribution<double> normal(model.mu, model.sigma);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double v = normal(engine);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(m - 1))};
}

BilProblem toy_bil_problem(const Eigen::Vector2d& observed, std::size_t n, std::size_t m) {
  BilProblem p;
  p.simulator = [](const Eigen::VectorXd& theta, std::size_t size, std::uint64_t seed) -> Eigen::VectorXd {
    ToyLocationScaleModel model{theta[0], theta[1], size};
    return toy_location_scale_simulate(model, size, seed);
  };
  p.observed = observed;
  p.n = n;
  p.m = m;
  p.functionals = coordinate_functionals(2, {"mu", "sigma"});
  return p;
}

}  // namespace simreg
