#include "binar/monitoring.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "binar/error.hpp"

namespace binar {

double rho(double s, double gamma) {
  if (!(s > 0.0)) throw DomainError("rho requires s > 0");
  return std::pow(s, -gamma) * std::pow(s + 1.0, gamma - 1.0);
}

double weight(int m, int k, double gamma) {
  if (m < 1) throw DomainError("weight requires m >= 1");
  if (k < 1) throw DomainError("weight requires k >= 1");
  return rho(static_cast<double>(k) / m, gamma) / std::sqrt(static_cast<double>(m));
}

void MonitorConfig::validate() const {
  if (m < 1) throw DomainError("training length m must be >= 1");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw DomainError("horizon N must be positive and finite");
  }
  if (!(gamma >= 0.0 && gamma < 0.5)) throw DomainError("gamma must lie in [0, 0.5)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (!(threshold > 0.0)) throw DomainError("threshold c must be positive");
  if (A.rows() == 0 || A.rows() != A.cols()) {
    throw DimensionError("A must be a non-empty square matrix");
  }
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DomainError("A must be symmetric");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(A).info() != Eigen::Success) {
    throw DomainError("A must be positive definite");
  }
}

int MonitorConfig::max_k() const {
  return static_cast<int>(std::floor(horizon * m + 1e-9));
}

double MonitorConfig::weight_at(int k) const {
  if (!custom_rho) return weight(m, k, gamma);
  if (k < 1) throw DomainError("weight requires k >= 1");
  return custom_rho(static_cast<double>(k) / m) / std::sqrt(static_cast<double>(m));
}

Monitor::Monitor(int n, ParamVector beta_hat, MonitorConfig config, int x_last)
    : n_(n),
      beta_hat_(std::move(beta_hat)),
      config_(std::move(config)),
      x_prev_(x_last),
      running_sum_(ScoreVector::Zero(beta_hat_.size())) {
  if (n_ < 1) throw DomainError("binomial total n must be >= 1");
  config_.validate();
  if (config_.A.rows() != beta_hat_.size()) {
    throw DimensionError("A must be (l+2) x (l+2)");
  }
  if (x_last < 0 || x_last > n_) throw DomainError("last training value outside [0, n]");
  history_.reserve(static_cast<std::size_t>(config_.max_k()));
}

double Monitor::update(int x_new, const Eigen::VectorXd& w_new) {
  if (alarm_at_) {
    throw MonitorTerminatedError("monitor already raised an alarm at k = " +
                                 std::to_string(*alarm_at_));
  }
  if (horizon_reached()) {
    throw MonitorTerminatedError("monitoring horizon k = " +
                                 std::to_string(config_.max_k()) + " reached");
  }
  if (x_new < 0 || x_new > n_) {
    throw DomainError("observation " + std::to_string(x_new) + " outside [0, " +
                      std::to_string(n_) + "]");
  }
  if (w_new.size() != beta_hat_.exo_dim()) {
    throw DimensionError("covariate has " + std::to_string(w_new.size()) +
                         " entries; expected " + std::to_string(beta_hat_.exo_dim()));
  }
  // Same arithmetic as score_term, so the sum matches a batch recomputation.
  const Eigen::VectorXd z = build_regressor(x_prev_, w_new);
  const double resid = x_new - n_ * logistic(beta_hat_.values().dot(z));
  running_sum_ += z * resid;
  x_prev_ = x_new;
  ++k_;

  const double w = config_.weight_at(k_);
  const double statistic = w * w * running_sum_.dot(config_.A * running_sum_);
  history_.push_back(statistic);
  if (statistic >= config_.threshold) alarm_at_ = k_;
  return statistic;
}

MonitorSetup monitor_init(const SeriesSample& training, int n,
                          const MonitorOptions& options) {
  double threshold = 0.0;
  if (const double* c = std::get_if<double>(&options.threshold)) {
    threshold = *c;
  } else if (const auto* table = std::get_if<ThresholdTable>(&options.threshold)) {
    threshold = table->at(options.gamma, options.alpha);
  } else {
    throw ThresholdUnavailableError("no threshold value or table supplied");
  }

  FitResult fit = fit_mple(training, n, options.solver);
  if (!fit.converged) {
    throw NonConvergenceError("training fit did not converge");
  }
  // The training scores must sum to zero at the estimate; the monitoring
  // statistic's null approximation depends on it.
  const ScoreVector training_sum = score(training, n, fit.beta_hat);
  if (training_sum.cwiseAbs().maxCoeff() > options.solver.score_tol) {
    throw NonConvergenceError("training score does not vanish at the estimate");
  }

  MonitorConfig config;
  config.m = training.length();
  config.horizon = options.horizon;
  config.gamma = options.gamma;
  config.alpha = options.alpha;
  config.threshold = threshold;
  const Eigen::Index p = fit.beta_hat.size();
  switch (options.weighting) {
    case WeightingPolicy::inverse_sigma0:
      config.A = spd_inverse(fit.sigma0_hat);
      break;
    case WeightingPolicy::identity:
      config.A = Eigen::MatrixXd::Identity(p, p);
      break;
    case WeightingPolicy::supplied:
      if (options.supplied_A.rows() != p || options.supplied_A.cols() != p) {
        throw DimensionError("supplied A must be (l+2) x (l+2)");
      }
      config.A = options.supplied_A;
      break;
  }
  Monitor monitor(n, fit.beta_hat, std::move(config), training.x.back());
  return MonitorSetup{std::move(fit), std::move(monitor)};
}

MonitorResult monitor_run(Monitor& monitor, const StreamSource& next,
                          const UpdateObserver& observer) {
  while (!monitor.terminated()) {
    std::optional<StreamPoint> point = next();
    if (!point) break;
    const double statistic = monitor.update(point->x, point->w);
    if (observer) observer(monitor, statistic);
  }
  MonitorResult result;
  result.alarm_at = monitor.alarm_at();
  result.history = monitor.history();
  result.truncated = !monitor.terminated();
  return result;
}

MonitorResult monitor_run(Monitor& monitor, std::span<const StreamPoint> stream) {
  std::size_t i = 0;
  return monitor_run(monitor, [&]() -> std::optional<StreamPoint> {
    if (i == stream.size()) return std::nullopt;
    return stream[i++];
  });
}

}  // namespace binar
