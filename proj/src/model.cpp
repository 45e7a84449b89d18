#include "binar/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/binomial_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "binar/error.hpp"

namespace binar {

ParamVector::ParamVector(Eigen::VectorXd values) : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw DimensionError("ParamVector needs at least (phi0, phi1)");
  }
  if (!values_.allFinite()) {
    throw DomainError("ParamVector entries must be finite");
  }
}

ParamVector::ParamVector(double phi0, double phi1,
                         const std::vector<double>& gamma) {
  Eigen::VectorXd v(2 + static_cast<Eigen::Index>(gamma.size()));
  v[0] = phi0;
  v[1] = phi1;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    v[2 + static_cast<Eigen::Index>(i)] = gamma[i];
  }
  *this = ParamVector(std::move(v));
}

void ExogenousSpec::validate() const {
  if (dist != "normal") {
    throw DomainError("unsupported exogenous distribution '" + dist + "'");
  }
  if (!std::isfinite(mean) || !std::isfinite(sd) || sd < 0.0) {
    throw DomainError("exogenous mean/sd must be finite with sd >= 0");
  }
  if (!std::isfinite(clamp_lo) || !std::isfinite(clamp_hi) ||
      !(clamp_lo < clamp_hi)) {
    throw DomainError("exogenous clamp bounds must be finite with lo < hi");
  }
  if (dim < 0) {
    throw DimensionError("exogenous dimension must be non-negative");
  }
}

double ExogenousSpec::clamp(double w) const {
  return std::min(std::max(w, clamp_lo), clamp_hi);
}

void ModelSpec::validate() const {
  if (n < 1) {
    throw DomainError("binomial total n must be >= 1");
  }
  exo.validate();
  if (beta.exo_dim() != exo.dim) {
    throw DimensionError("beta has " + std::to_string(beta.size()) +
                         " entries; expected l + 2 = " +
                         std::to_string(exo.dim + 2));
  }
  if (!(box_bound > 0.0) || !beta.within_box(box_bound)) {
    throw DomainError("beta lies outside the parameter box [-" +
                      std::to_string(box_bound) + ", " +
                      std::to_string(box_bound) + "]");
  }
  if (burn_in < 0) {
    throw DomainError("burn_in must be non-negative");
  }
}

ModelSpec benchmark_spec() {
  ModelSpec spec;
  spec.n = 10;
  spec.beta = ParamVector(-1.0, 0.1, {0.4});
  spec.exo.dist = "normal";
  spec.exo.mean = 1.0;
  spec.exo.sd = 0.1;
  spec.exo.clamp_lo = 0.0;
  spec.exo.clamp_hi = 10.0;
  spec.exo.dim = 1;
  return spec;
}

Eigen::VectorXd SeriesSample::regressor(int t) const {
  Eigen::VectorXd z(2 + w.cols());
  z[0] = 1.0;
  z[1] = x[static_cast<std::size_t>(t - 1)];
  z.tail(w.cols()) = w.row(t - 1).transpose();
  return z;
}

void SeriesSample::validate(int n) const {
  if (x.empty()) {
    throw DimensionError("series has no observations");
  }
  if (w.rows() != length()) {
    throw DimensionError("exogenous matrix has " + std::to_string(w.rows()) +
                         " rows; expected " + std::to_string(length()));
  }
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (x[t] < 0 || x[t] > n) {
      throw DomainError("x[" + std::to_string(t) + "] = " +
                        std::to_string(x[t]) + " outside [0, " +
                        std::to_string(n) + "]");
    }
  }
  if (!w.allFinite()) {
    throw DomainError("exogenous values must be finite");
  }
}

double link_eval(double mu, int n) {
  if (n < 1 || !(mu > 0.0) || !(mu < n)) {
    throw DomainError("link_eval requires 0 < mu < n");
  }
  return std::log(mu / (n - mu));
}

double inverse_link(double eta, int n) { return n * logistic(eta); }

double logistic(double eta) {
  if (eta >= 0.0) {
    return 1.0 / (1.0 + std::exp(-eta));
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double log_logistic(double eta) {
  // -log(1 + exp(-eta))
  if (eta >= 0.0) {
    return -std::log1p(std::exp(-eta));
  }
  return eta - std::log1p(std::exp(eta));
}

double success_prob(const ParamVector& beta, const Eigen::VectorXd& z) {
  if (z.size() != beta.size()) {
    throw DimensionError("regressor has " + std::to_string(z.size()) +
                         " entries; beta has " + std::to_string(beta.size()));
  }
  // The exact value is never 0 or 1; keep the rounded one strictly inside.
  constexpr double kTiny = std::numeric_limits<double>::denorm_min();
  constexpr double kBelowOne = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return std::clamp(logistic(beta.values().dot(z)), kTiny, kBelowOne);
}

Eigen::VectorXd build_regressor(int x_prev, const Eigen::VectorXd& w) {
  Eigen::VectorXd z(2 + w.size());
  z[0] = 1.0;
  z[1] = x_prev;
  z.tail(w.size()) = w;
  return z;
}

double success_prob_floor(const ModelSpec& spec) {
  const double w_max =
      std::max(std::abs(spec.exo.clamp_lo), std::abs(spec.exo.clamp_hi));
  const double eta_max =
      spec.box_bound * (1.0 + spec.n + spec.exo.dim * w_max);
  return logistic(-eta_max);
}

Eigen::VectorXd draw_exogenous(const ExogenousSpec& exo, Engine& engine) {
  Eigen::VectorXd w(exo.dim);
  if (exo.sd == 0.0) {
    w.setConstant(exo.clamp(exo.mean));
    return w;
  }
  boost::random::normal_distribution<double> normal(exo.mean, exo.sd);
  for (Eigen::Index i = 0; i < exo.dim; ++i) {
    w[i] = exo.clamp(normal(engine));
  }
  return w;
}

int draw_next(int n, const ParamVector& beta, const Eigen::VectorXd& z,
              Engine& engine) {
  const double p = logistic(beta.values().dot(z));
  if (p >= 1.0) return n;
  if (p <= 0.0) return 0;
  boost::random::binomial_distribution<int, double> binomial(n, p);
  return binomial(engine);
}

SeriesSample simulate_series(const ModelSpec& spec, int length,
                             std::uint64_t seed, std::optional<int> init,
                             const std::optional<RegimeChange>& change) {
  spec.validate();
  if (length < 1) {
    throw DomainError("series length must be >= 1");
  }
  if (change && change->beta.size() != spec.beta.size()) {
    throw DimensionError("regime-change beta has the wrong dimension");
  }
  Engine engine{seed};

  int x_prev;
  if (init) {
    if (*init < 0 || *init > spec.n) {
      throw DomainError("initial value outside [0, n]");
    }
    x_prev = *init;
  } else {
    boost::random::binomial_distribution<int, double> start(spec.n, 0.5);
    x_prev = start(engine);
    for (int b = 0; b < spec.burn_in; ++b) {
      const Eigen::VectorXd w = draw_exogenous(spec.exo, engine);
      x_prev = draw_next(spec.n, spec.beta, build_regressor(x_prev, w), engine);
    }
  }

  SeriesSample sample;
  sample.seed = seed;
  sample.x.resize(static_cast<std::size_t>(length) + 1);
  sample.w.resize(length, spec.exo.dim);
  sample.x[0] = x_prev;
  for (int t = 1; t <= length; ++t) {
    const ParamVector& beta =
        (change && t >= change->at_t) ? change->beta : spec.beta;
    const Eigen::VectorXd w = draw_exogenous(spec.exo, engine);
    sample.w.row(t - 1) = w.transpose();
    x_prev = draw_next(spec.n, beta, build_regressor(x_prev, w), engine);
    sample.x[static_cast<std::size_t>(t)] = x_prev;
  }
  return sample;
}

void gauss_legendre(int count, double lo, double hi, Eigen::VectorXd& nodes,
                    Eigen::VectorXd& weights) {
  if (count < 1) {
    throw DomainError("quadrature needs at least one node");
  }
  nodes.resize(count);
  weights.resize(count);
  const double mid = 0.5 * (hi + lo);
  const double half = 0.5 * (hi - lo);
  const int roots = (count + 1) / 2;
  for (int i = 0; i < roots; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (count + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = 0.0;
      for (int j = 1; j <= count; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p2) / j;
      }
      dp = count * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = mid - half * x;
    nodes[count - 1 - i] = mid + half * x;
    weights[i] = 2.0 * half / ((1.0 - x * x) * dp * dp);
    weights[count - 1 - i] = weights[i];
  }
}

namespace {

// One-dimensional rule for a clamped normal: interior Gauss-Legendre nodes
// weighted by the density, plus atoms at the clamp bounds.
void clamped_normal_rule(const ExogenousSpec& exo, int count,
                         std::vector<double>& points,
                         std::vector<double>& masses) {
  points.clear();
  masses.clear();
  if (exo.sd == 0.0) {
    points.push_back(exo.clamp(exo.mean));
    masses.push_back(1.0);
    return;
  }
  const boost::math::normal_distribution<double> law(exo.mean, exo.sd);
  const double lower_tail = boost::math::cdf(law, exo.clamp_lo);
  const double upper_tail = boost::math::cdf(boost::math::complement(law, exo.clamp_hi));
  const double a = std::max(exo.clamp_lo, exo.mean - 12.0 * exo.sd);
  const double b = std::min(exo.clamp_hi, exo.mean + 12.0 * exo.sd);
  if (lower_tail > 0.0) {
    points.push_back(exo.clamp_lo);
    masses.push_back(lower_tail);
  }
  if (a < b) {
    Eigen::VectorXd nodes, weights;
    gauss_legendre(count, a, b, nodes, weights);
    double interior = 0.0;
    std::vector<double> raw(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      raw[static_cast<std::size_t>(i)] =
          weights[i] * boost::math::pdf(law, nodes[i]);
      interior += raw[static_cast<std::size_t>(i)];
    }
    const double target = 1.0 - lower_tail - upper_tail;
    for (int i = 0; i < count; ++i) {
      points.push_back(nodes[i]);
      masses.push_back(raw[static_cast<std::size_t>(i)] * target / interior);
    }
  }
  if (upper_tail > 0.0) {
    points.push_back(exo.clamp_hi);
    masses.push_back(upper_tail);
  }
  double total = 0.0;
  for (double m : masses) total += m;
  for (double& m : masses) m /= total;
}

double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

StationaryResult stationary_oracle(const ModelSpec& spec, int w_quadrature) {
  spec.validate();
  if (spec.n + 1 > kOracleMaxStates) {
    throw DomainError("stationary oracle limited to n <= 30");
  }
  if (spec.exo.dim > 2) {
    throw DimensionError("stationary oracle supports at most 2 exogenous dims");
  }
  const int n = spec.n;
  const int states = n + 1;

  std::vector<double> pts, masses;
  clamped_normal_rule(spec.exo, w_quadrature, pts, masses);

  // Tensor-product rule over the exogenous coordinates.
  std::vector<Eigen::VectorXd> w_nodes;
  std::vector<double> w_mass;
  if (spec.exo.dim == 0) {
    w_nodes.emplace_back(0);
    w_mass.push_back(1.0);
  } else if (spec.exo.dim == 1) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      w_nodes.push_back(Eigen::VectorXd::Constant(1, pts[i]));
      w_mass.push_back(masses[i]);
    }
  } else {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = 0; j < pts.size(); ++j) {
        Eigen::VectorXd w(2);
        w << pts[i], pts[j];
        w_nodes.push_back(w);
        w_mass.push_back(masses[i] * masses[j]);
      }
    }
  }

  StationaryResult result;
  result.transition = Eigen::MatrixXd::Zero(states, states);
  for (int from = 0; from < states; ++from) {
    for (std::size_t q = 0; q < w_nodes.size(); ++q) {
      const double eta = spec.beta.values().dot(build_regressor(from, w_nodes[q]));
      const double log_p = log_logistic(eta);
      const double log_q = log_logistic(-eta);
      for (int to = 0; to < states; ++to) {
        result.transition(from, to) +=
            w_mass[q] * std::exp(log_choose(n, to) + to * log_p + (n - to) * log_q);
      }
    }
    result.transition.row(from) /= result.transition.row(from).sum();
  }

  constexpr int kMaxIterations = 1'000'000;
  constexpr double kTolerance = 1e-12;
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(states, 1.0 / states);
  for (int it = 1; it <= kMaxIterations; ++it) {
    Eigen::RowVectorXd next = mu * result.transition;
    const double change = (next - mu).cwiseAbs().maxCoeff();
    mu = next;
    if (change < kTolerance) {
      result.pmf = (mu / mu.sum()).transpose();
      result.iterations = it;
      return result;
    }
  }
  throw NonConvergenceError("stationary power iteration did not converge");
}

}  // namespace binar
