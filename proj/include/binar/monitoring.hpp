#pragma once

#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "binar/calibration.hpp"
#include "binar/estimation.hpp"
#include "binar/model.hpp"

namespace binar {

/// rho(s, gamma) = s^{-gamma} (s + 1)^{gamma - 1}, s > 0.
double rho(double s, double gamma);

/// omega(m, k, gamma) = m^{-1/2} rho(k / m, gamma), k >= 1.
double weight(int m, int k, double gamma);

/// Custom boundary shape s -> rho(s); the default is rho(s, gamma).
using RhoFunction = std::function<double(double)>;

struct MonitorConfig {
  int m = 0;             // training length
  double horizon = 3.0;  // N: monitoring stops at k = floor(N m)
  double gamma = 0.0;
  double alpha = 0.05;
  double threshold = 0.0;  // c; +inf disables alarms
  Eigen::MatrixXd A;
  RhoFunction custom_rho;

  void validate() const;
  int max_k() const;
  double weight_at(int k) const;
};

/// Close-end sequential monitor. Holds the frozen estimate, the running
/// score sum S(m, k) and the alarm state. Once an alarm fires or k reaches
/// the horizon, further updates throw MonitorTerminatedError.
class Monitor {
 public:
  Monitor(int n, ParamVector beta_hat, MonitorConfig config, int x_last);

  /// Consumes X_{m+k+1} with its covariate W_{m+k+1}; returns the statistic
  /// omega^2(m, k+1) S^T A S.
  double update(int x_new, const Eigen::VectorXd& w_new);

  int n() const { return n_; }
  int k() const { return k_; }
  int x_prev() const { return x_prev_; }
  const ParamVector& beta_hat() const { return beta_hat_; }
  const MonitorConfig& config() const { return config_; }
  const ScoreVector& running_sum() const { return running_sum_; }
  const std::vector<double>& history() const { return history_; }
  std::optional<int> alarm_at() const { return alarm_at_; }
  bool horizon_reached() const { return k_ >= config_.max_k(); }
  bool terminated() const { return alarm_at_.has_value() || horizon_reached(); }

 private:
  int n_;
  ParamVector beta_hat_;
  MonitorConfig config_;
  int x_prev_;
  int k_ = 0;
  ScoreVector running_sum_;
  std::vector<double> history_;
  std::optional<int> alarm_at_;
};

/// Where the critical value comes from.
enum class WeightingPolicy {
  inverse_sigma0,  // A = sigma0_hat^{-1} of the training fit
  identity,        // A = I; statistic is omega^2 |S|^2
  supplied,        // A given by the caller
};

struct MonitorOptions {
  double horizon = 3.0;
  double gamma = 0.0;
  double alpha = 0.05;
  WeightingPolicy weighting = WeightingPolicy::inverse_sigma0;
  Eigen::MatrixXd supplied_A;
  /// A literal c, or a table looked up at (gamma, alpha).
  std::variant<std::monostate, double, ThresholdTable> threshold;
  SolverConfig solver;
};

struct MonitorSetup {
  FitResult fit;
  Monitor monitor;
};

/// Fits on the training series, checks that the training score sums to
/// zero at the estimate, builds A and resolves the threshold.
MonitorSetup monitor_init(const SeriesSample& training, int n,
                          const MonitorOptions& options);

struct StreamPoint {
  int x = 0;
  Eigen::VectorXd w;
};

struct MonitorResult {
  std::optional<int> alarm_at;
  std::vector<double> history;
  bool truncated = false;  // stream ended before the horizon without alarm
};

using StreamSource = std::function<std::optional<StreamPoint>()>;
using UpdateObserver = std::function<void(const Monitor&, double statistic)>;

/// Feeds points until an alarm, the horizon, or the end of the stream.
MonitorResult monitor_run(Monitor& monitor, const StreamSource& next,
                          const UpdateObserver& observer = {});
MonitorResult monitor_run(Monitor& monitor, std::span<const StreamPoint> stream);

}  // namespace binar
