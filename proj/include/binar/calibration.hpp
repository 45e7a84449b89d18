#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace binar {

/// How the quadratic form in the limiting functional is weighted.
enum class CalibrationWeighting {
  inverse_sigma,  // A = sigma^{-1}; the functional no longer depends on sigma
  identity,       // A = I
  supplied,       // A = CalibrationConfig::A
};

struct CalibrationConfig {
  Eigen::MatrixXd sigma;  // covariance of W_1, W_2 (e.g. sigma0_hat)
  CalibrationWeighting weighting = CalibrationWeighting::inverse_sigma;
  Eigen::MatrixXd A;  // read only for CalibrationWeighting::supplied
  double horizon = 3.0;  // N
  int grid_m = 1000;
  int reps = 10000;
  std::vector<double> gammas{0.0, 0.25, 0.4};
  std::vector<double> alphas{0.1, 0.05, 0.025, 0.01};
  std::uint64_t master_seed = 20240601;
  int threads = 1;

  void validate() const;
  /// Number of grid points N * grid_m at which the supremum is taken.
  int grid_points() const;
};

/// Critical values c(gamma, alpha) with the settings that produced them.
struct ThresholdTable {
  struct Cell {
    double gamma = 0.0;
    double alpha = 0.0;
    double c = 0.0;
  };
  std::vector<Cell> cells;
  int reps = 0;
  int grid_m = 0;
  double horizon = 0.0;
  std::uint64_t seed = 0;

  std::optional<double> find(double gamma, double alpha) const;
  /// Throws ThresholdUnavailableError when the cell is absent.
  double at(double gamma, double alpha) const;
};

/// sup over k = 1..N*grid_m of rho^2(s_k, gamma) (W1(s_k) - s_k W2(1))^T A
/// (W1(s_k) - s_k W2(1)) with s_k = k / grid_m, for one replication.
///
/// Replication `rep` consumes the standard-normal stream
/// make_engine(master_seed, rep): first the d coordinates of W2(1), then d
/// coordinates per increment k = 1..N*grid_m. W1 is the running sum of
/// increments divided by sqrt(grid_m). Both are mapped to covariance sigma
/// through its Cholesky factor.
double sample_sup_functional(const CalibrationConfig& config, double gamma,
                             std::uint64_t rep);

/// Same path evaluated for several gammas at once (common random numbers).
std::vector<double> sample_sup_functionals(const CalibrationConfig& config,
                                           std::span<const double> gammas,
                                           std::uint64_t rep);

/// samples[g][r]: replication r of the functional for config.gammas[g].
std::vector<std::vector<double>> draw_sup_samples(const CalibrationConfig& config);

/// Smallest sample value whose empirical CDF is >= 1 - alpha.
double upper_quantile(std::vector<double> samples, double alpha);

struct ThresholdEstimate {
  double c = 0.0;
  bool unstable = false;  // reps * alpha < 5: too few tail samples
};

ThresholdEstimate compute_threshold(const CalibrationConfig& config,
                                    double gamma, double alpha);

ThresholdTable threshold_table(const CalibrationConfig& config);

}  // namespace binar
