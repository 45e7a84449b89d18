#include "binar/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/random/normal_distribution.hpp>

#include "binar/error.hpp"
#include "binar/monitoring.hpp"
#include "binar/parallel.hpp"
#include "binar/rng.hpp"

namespace binar {
namespace {

void require_spd(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    throw DimensionError(std::string(name) + " must be a non-empty square matrix");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DomainError(std::string(name) + " must be symmetric");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(m).info() != Eigen::Success) {
    throw CholeskyError(std::string(name) + " is not positive definite");
  }
}

// Quadratic-form weight on the standard-normal path U, where the Brownian
// path is L U with L L^T = sigma: (L U)^T A (L U) = U^T (L^T A L) U.
struct PathForm {
  Eigen::Index dim = 0;
  bool unit = false;  // L^T A L is exactly the identity
  Eigen::MatrixXd weight;

  double operator()(const Eigen::VectorXd& u) const {
    return unit ? u.squaredNorm() : u.dot(weight * u);
  }
};

PathForm prepare_form(const CalibrationConfig& config) {
  config.validate();
  PathForm form;
  form.dim = config.sigma.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(config.sigma);
  if (llt.info() != Eigen::Success) {
    throw CholeskyError("sigma is not positive definite");
  }
  const Eigen::MatrixXd lower = llt.matrixL();
  switch (config.weighting) {
    case CalibrationWeighting::inverse_sigma:
      form.unit = true;
      break;
    case CalibrationWeighting::identity:
      form.weight = lower.transpose() * lower;
      break;
    case CalibrationWeighting::supplied:
      form.weight = lower.transpose() * config.A * lower;
      form.weight = 0.5 * (form.weight + form.weight.transpose());
      break;
  }
  return form;
}

// rho^2(k / grid_m, gamma) for k = 1..K, one row per gamma.
std::vector<std::vector<double>> rho_squared_grid(const CalibrationConfig& config,
                                                  std::span<const double> gammas) {
  const int points = config.grid_points();
  std::vector<std::vector<double>> grid(gammas.size(),
                                        std::vector<double>(static_cast<std::size_t>(points)));
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    for (int k = 1; k <= points; ++k) {
      const double r = rho(static_cast<double>(k) / config.grid_m, gammas[g]);
      grid[g][static_cast<std::size_t>(k - 1)] = r * r;
    }
  }
  return grid;
}

std::vector<double> sup_for_rep(const CalibrationConfig& config,
                                const PathForm& form,
                                const std::vector<std::vector<double>>& rho2,
                                std::uint64_t rep) {
  Engine engine = make_engine(config.master_seed, rep);
  boost::random::normal_distribution<double> normal;
  const Eigen::Index d = form.dim;

  Eigen::VectorXd bridge_end(d);
  for (Eigen::Index i = 0; i < d; ++i) bridge_end[i] = normal(engine);

  const double inv_sqrt_grid = 1.0 / std::sqrt(static_cast<double>(config.grid_m));
  const int points = config.grid_points();
  Eigen::VectorXd partial = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd diff(d);
  std::vector<double> best(rho2.size(), 0.0);
  for (int k = 1; k <= points; ++k) {
    for (Eigen::Index i = 0; i < d; ++i) partial[i] += normal(engine);
    const double s = static_cast<double>(k) / config.grid_m;
    diff = partial * inv_sqrt_grid - s * bridge_end;
    const double q = form(diff);
    for (std::size_t g = 0; g < rho2.size(); ++g) {
      best[g] = std::max(best[g], rho2[g][static_cast<std::size_t>(k - 1)] * q);
    }
  }
  return best;
}

}  // namespace

void CalibrationConfig::validate() const {
  require_spd(sigma, "sigma");
  if (weighting == CalibrationWeighting::supplied) {
    require_spd(A, "A");
    if (A.rows() != sigma.rows()) {
      throw DimensionError("A and sigma dimensions differ");
    }
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw DomainError("horizon N must be positive");
  }
  if (grid_m < 100) throw DomainError("grid_m must be >= 100");
  if (reps < 100) throw DomainError("reps must be >= 100");
  if (grid_points() < 1) throw DomainError("N * grid_m must be >= 1");
  for (double g : gammas) {
    if (!(g >= 0.0 && g < 0.5)) throw DomainError("gamma must lie in [0, 0.5)");
  }
  for (double a : alphas) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  }
}

int CalibrationConfig::grid_points() const {
  return static_cast<int>(std::floor(horizon * grid_m + 1e-9));
}

std::optional<double> ThresholdTable::find(double gamma, double alpha) const {
  for (const Cell& cell : cells) {
    if (std::abs(cell.gamma - gamma) < 1e-12 && std::abs(cell.alpha - alpha) < 1e-12) {
      return cell.c;
    }
  }
  return std::nullopt;
}

double ThresholdTable::at(double gamma, double alpha) const {
  if (auto c = find(gamma, alpha)) return *c;
  throw ThresholdUnavailableError("no threshold for gamma = " +
                                  std::to_string(gamma) +
                                  ", alpha = " + std::to_string(alpha));
}

double sample_sup_functional(const CalibrationConfig& config, double gamma,
                             std::uint64_t rep) {
  const double gammas[] = {gamma};
  return sample_sup_functionals(config, gammas, rep).front();
}

std::vector<double> sample_sup_functionals(const CalibrationConfig& config,
                                           std::span<const double> gammas,
                                           std::uint64_t rep) {
  const PathForm form = prepare_form(config);
  return sup_for_rep(config, form, rho_squared_grid(config, gammas), rep);
}

std::vector<std::vector<double>> draw_sup_samples(const CalibrationConfig& config) {
  const PathForm form = prepare_form(config);
  const auto rho2 = rho_squared_grid(config, config.gammas);
  const auto reps = static_cast<std::size_t>(config.reps);
  std::vector<std::vector<double>> samples(config.gammas.size(),
                                           std::vector<double>(reps));
  parallel_for(reps, config.threads, [&](std::size_t r) {
    const std::vector<double> sup = sup_for_rep(config, form, rho2, r);
    for (std::size_t g = 0; g < sup.size(); ++g) samples[g][r] = sup[g];
  });
  return samples;
}

double upper_quantile(std::vector<double> samples, double alpha) {
  if (samples.empty()) throw DomainError("quantile of an empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  std::sort(samples.begin(), samples.end());
  const double count = static_cast<double>(samples.size());
  const double rank = std::ceil((1.0 - alpha) * count - 1e-9);
  const auto index = static_cast<std::size_t>(
      std::clamp(rank - 1.0, 0.0, count - 1.0));
  return samples[index];
}

ThresholdEstimate compute_threshold(const CalibrationConfig& config,
                                    double gamma, double alpha) {
  CalibrationConfig single = config;
  single.gammas = {gamma};
  single.alphas = {alpha};
  auto samples = draw_sup_samples(single);
  ThresholdEstimate estimate;
  estimate.c = upper_quantile(std::move(samples.front()), alpha);
  estimate.unstable = config.reps * alpha < 5.0;
  return estimate;
}

ThresholdTable threshold_table(const CalibrationConfig& config) {
  auto samples = draw_sup_samples(config);
  ThresholdTable table;
  table.reps = config.reps;
  table.grid_m = config.grid_m;
  table.horizon = config.horizon;
  table.seed = config.master_seed;
  for (std::size_t g = 0; g < config.gammas.size(); ++g) {
    std::sort(samples[g].begin(), samples[g].end());
    for (double alpha : config.alphas) {
      table.cells.push_back({config.gammas[g], alpha, upper_quantile(samples[g], alpha)});
    }
  }
  return table;
}

}  // namespace binar
