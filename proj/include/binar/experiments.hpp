#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "binar/calibration.hpp"
#include "binar/estimation.hpp"
#include "binar/model.hpp"

namespace binar {

/// Parameter switch during monitoring: monitored point `at_k` (and every
/// later one) is drawn with `beta`.
struct ChangeSpec {
  int at_k = 11;
  ParamVector beta;
};

/// Source of the monitoring matrix A in the size and power harnesses.
enum class ExperimentWeighting {
  reference,  // sigma0_hat^{-1} from one long reference simulation
  training,   // sigma0_hat^{-1} from each replication's training fit
  identity,
};

struct ExperimentConfig {
  ModelSpec spec = benchmark_spec();
  std::vector<int> m_list{500, 1000, 1500};
  int reps = 100;
  std::vector<double> gammas{0.0, 0.25, 0.4};
  std::vector<double> alphas{0.1, 0.05, 0.025, 0.01};
  double horizon = 3.0;
  std::optional<ChangeSpec> change;
  std::uint64_t master_seed = 20240601;
  int threads = 1;
  SolverConfig solver;

  ExperimentWeighting weighting = ExperimentWeighting::reference;
  int reference_length = 10000;
  /// Thresholds for size/power; calibrated on demand when absent.
  std::optional<ThresholdTable> thresholds;
  int calibration_reps = 10000;
  int calibration_grid_m = 1000;
  /// Power: statistic paths of the first `trace_reps` replications are kept.
  int trace_reps = 0;

  void validate() const;
};

/// Fraction of failed fits above which a cell is flagged.
inline constexpr double kFailureFlagRate = 0.01;

struct ConsistencyRow {
  int m = 0;
  Eigen::VectorXd mse;
  int fits = 0;
  int failures = 0;
  bool flagged = false;
};

struct ConsistencyReport {
  std::vector<ConsistencyRow> rows;
  int reps = 0;
  std::uint64_t master_seed = 0;
};

struct NormalityReport {
  int m = 0;
  int reps = 0;
  int fits = 0;
  int failures = 0;
  bool flagged = false;
  bool insufficient = false;  // fewer than kMinNormalitySample fits
  Eigen::VectorXd mean;
  Eigen::VectorXd mc_se;  // sd / sqrt(fits)
  Eigen::VectorXd skewness;
  Eigen::VectorXd skewness_z;
  Eigen::VectorXd excess_kurtosis;
  Eigen::VectorXd kurtosis_z;
  Eigen::VectorXd qq_correlation;
  Eigen::MatrixXd estimates;  // one row per successful fit
  std::uint64_t master_seed = 0;
};

inline constexpr int kMinNormalitySample = 20;

struct SizeCell {
  int m = 0;
  double gamma = 0.0;
  double alpha = 0.0;
  double c = 0.0;
  double rejection_rate = 0.0;
  int reps_used = 0;
  int failures = 0;
  bool flagged = false;
};

struct SizeReport {
  std::vector<SizeCell> cells;
  ThresholdTable thresholds;
  Eigen::MatrixXd reference_A;  // empty unless weighting == reference
  int reps = 0;
  std::uint64_t master_seed = 0;

  const SizeCell& cell(int m, double gamma, double alpha) const;
};

struct PowerCell {
  int m = 0;
  double gamma = 0.0;
  double alpha = 0.0;
  double c = 0.0;
  double detection_rate = 0.0;
  double mean_detection = 0.0;    // mean alarm index k over detected runs
  double median_detection = 0.0;
  Eigen::VectorXd score_drift;    // mean post-change score per step
  int reps_used = 0;
  int failures = 0;
  bool flagged = false;
  std::vector<int> detections;    // alarm index per replication, 0 = none
};

struct StatisticTrace {
  int m = 0;
  double gamma = 0.0;
  int rep = 0;
  std::vector<double> statistics;
};

struct PowerReport {
  std::vector<PowerCell> cells;
  std::vector<StatisticTrace> traces;
  ThresholdTable thresholds;
  Eigen::MatrixXd reference_A;
  int reps = 0;
  int change_at = 0;
  std::uint64_t master_seed = 0;

  const PowerCell& cell(int m, double gamma, double alpha) const;
};

/// sigma0_hat and its inverse from one long simulation of the model.
struct ReferenceWeighting {
  FitResult fit;
  Eigen::MatrixXd sigma0;
  Eigen::MatrixXd A;
};
ReferenceWeighting reference_weighting(const ExperimentConfig& config);

/// Seed of replication `rep` in the cell with training length `m`.
std::uint64_t replication_seed(std::uint64_t master, int m, int rep);

ConsistencyReport run_consistency(const ExperimentConfig& config);
/// Uses config.m_list.front() as the sample length.
NormalityReport run_normality(const ExperimentConfig& config);
SizeReport run_size(const ExperimentConfig& config);
/// Requires config.change.
PowerReport run_power(const ExperimentConfig& config);

/// Pearson correlation of the sorted, standardized sample against normal
/// quantiles at Blom plotting positions (i - 3/8) / (n + 1/4).
double qq_correlation(std::vector<double> sample);

}  // namespace binar
