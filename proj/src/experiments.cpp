#include "binar/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "binar/error.hpp"
#include "binar/monitoring.hpp"
#include "binar/parallel.hpp"
#include "binar/rng.hpp"

namespace binar {
namespace {

constexpr std::uint64_t kReferenceStream = 0x7265666572656e63ULL;    // "referenc"
constexpr std::uint64_t kCalibrationStream = 0x63616c6962726174ULL;  // "calibrat"

SeriesSample head(const SeriesSample& full, int m) {
  SeriesSample out;
  out.x.assign(full.x.begin(), full.x.begin() + m + 1);
  out.w = full.w.topRows(m);
  out.seed = full.seed;
  return out;
}

bool flag_failures(int failures, int reps) {
  return failures > kFailureFlagRate * reps;
}

// Fit that counts as a failure when it throws or does not converge.
std::optional<FitResult> try_fit(const SeriesSample& series, int n,
                                 const SolverConfig& solver) {
  try {
    FitResult fit = fit_mple(series, n, solver);
    if (!fit.converged) return std::nullopt;
    return fit;
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct MonitoringSetup {
  ThresholdTable thresholds;
  std::optional<ReferenceWeighting> reference;
};

MonitoringSetup prepare_monitoring(const ExperimentConfig& config) {
  MonitoringSetup setup;
  const Eigen::Index p = config.spec.beta.size();
  if (config.weighting != ExperimentWeighting::training) {
    setup.reference = reference_weighting(config);
  }
  if (config.thresholds) {
    setup.thresholds = *config.thresholds;
    return setup;
  }
  CalibrationConfig calibration;
  calibration.horizon = config.horizon;
  calibration.grid_m = config.calibration_grid_m;
  calibration.reps = config.calibration_reps;
  calibration.gammas = config.gammas;
  calibration.alphas = config.alphas;
  calibration.master_seed = derive_seed(config.master_seed, kCalibrationStream);
  calibration.threads = config.threads;
  if (config.weighting == ExperimentWeighting::identity) {
    calibration.sigma = setup.reference->sigma0;
    calibration.weighting = CalibrationWeighting::identity;
  } else {
    // A = sigma^{-1}: the limit law does not depend on sigma.
    calibration.sigma = setup.reference ? setup.reference->sigma0
                                        : Eigen::MatrixXd::Identity(p, p);
    calibration.weighting = CalibrationWeighting::inverse_sigma;
  }
  setup.thresholds = threshold_table(calibration);
  return setup;
}

Eigen::MatrixXd monitoring_matrix(const ExperimentConfig& config,
                                  const MonitoringSetup& setup,
                                  const FitResult& fit) {
  switch (config.weighting) {
    case ExperimentWeighting::reference:
      return setup.reference->A;
    case ExperimentWeighting::training:
      return spd_inverse(fit.sigma0_hat);
    case ExperimentWeighting::identity:
      break;
  }
  return Eigen::MatrixXd::Identity(fit.beta_hat.size(), fit.beta_hat.size());
}

// Full statistic path k = 1..floor(N m) for one gamma, alarms disabled.
std::vector<double> statistic_path(const ExperimentConfig& config,
                                   const SeriesSample& full, int m,
                                   const FitResult& fit, const Eigen::MatrixXd& A,
                                   double gamma, ScoreVector* score_at_change,
                                   ScoreVector* score_at_end) {
  MonitorConfig mc;
  mc.m = m;
  mc.horizon = config.horizon;
  mc.gamma = gamma;
  mc.alpha = 0.05;
  mc.threshold = std::numeric_limits<double>::infinity();
  mc.A = A;
  Monitor monitor(config.spec.n, fit.beta_hat, std::move(mc), full.x[static_cast<std::size_t>(m)]);
  const int change_k = config.change ? config.change->at_k - 1 : -1;
  for (int t = m + 1; t <= full.length(); ++t) {
    monitor.update(full.x[static_cast<std::size_t>(t)], full.w.row(t - 1).transpose());
    if (score_at_change && monitor.k() == change_k) *score_at_change = monitor.running_sum();
  }
  if (score_at_change && change_k == 0) {
    *score_at_change = ScoreVector::Zero(fit.beta_hat.size());
  }
  if (score_at_end) *score_at_end = monitor.running_sum();
  return monitor.history();
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

void ExperimentConfig::validate() const {
  spec.validate();
  if (reps < 1) throw DomainError("reps must be >= 1");
  if (m_list.empty()) throw DomainError("m_list must not be empty");
  for (int m : m_list) {
    if (m < 1) throw DomainError("every m must be >= 1");
  }
  if (!(horizon > 0.0)) throw DomainError("horizon N must be positive");
  if (change) {
    if (change->at_k < 1) throw DomainError("change.at_k must be >= 1");
    if (change->beta.size() != spec.beta.size()) {
      throw DimensionError("change.beta has the wrong dimension");
    }
  }
  if (reference_length < 2 + spec.exo.dim + 1) {
    throw DomainError("reference_length too short to fit");
  }
}

const SizeCell& SizeReport::cell(int m, double gamma, double alpha) const {
  for (const SizeCell& c : cells) {
    if (c.m == m && std::abs(c.gamma - gamma) < 1e-12 && std::abs(c.alpha - alpha) < 1e-12) {
      return c;
    }
  }
  throw DomainError("no size cell for the requested (m, gamma, alpha)");
}

const PowerCell& PowerReport::cell(int m, double gamma, double alpha) const {
  for (const PowerCell& c : cells) {
    if (c.m == m && std::abs(c.gamma - gamma) < 1e-12 && std::abs(c.alpha - alpha) < 1e-12) {
      return c;
    }
  }
  throw DomainError("no power cell for the requested (m, gamma, alpha)");
}

std::uint64_t replication_seed(std::uint64_t master, int m, int rep) {
  return derive_seed(derive_seed(master, static_cast<std::uint64_t>(m)),
                     static_cast<std::uint64_t>(rep));
}

ReferenceWeighting reference_weighting(const ExperimentConfig& config) {
  const SeriesSample series =
      simulate_series(config.spec, config.reference_length,
                      derive_seed(config.master_seed, kReferenceStream));
  ReferenceWeighting ref;
  ref.fit = fit_mple(series, config.spec.n, config.solver);
  ref.sigma0 = ref.fit.sigma0_hat;
  ref.A = spd_inverse(ref.sigma0);
  return ref;
}

ConsistencyReport run_consistency(const ExperimentConfig& config) {
  config.validate();
  ConsistencyReport report;
  report.reps = config.reps;
  report.master_seed = config.master_seed;
  const Eigen::VectorXd truth = config.spec.beta.values();
  for (int m : config.m_list) {
    std::vector<std::optional<Eigen::VectorXd>> errors(static_cast<std::size_t>(config.reps));
    parallel_for(errors.size(), config.threads, [&](std::size_t r) {
      const SeriesSample s = simulate_series(
          config.spec, m, replication_seed(config.master_seed, m, static_cast<int>(r)));
      if (auto fit = try_fit(s, config.spec.n, config.solver)) {
        errors[r] = fit->beta_hat.values() - truth;
      }
    });
    ConsistencyRow row;
    row.m = m;
    row.mse = Eigen::VectorXd::Zero(truth.size());
    for (const auto& e : errors) {
      if (!e) {
        ++row.failures;
        continue;
      }
      row.mse += e->cwiseAbs2();
      ++row.fits;
    }
    if (row.fits > 0) row.mse /= row.fits;
    row.flagged = flag_failures(row.failures, config.reps);
    report.rows.push_back(std::move(row));
  }
  return report;
}

double qq_correlation(std::vector<double> sample) {
  const auto count = sample.size();
  if (count < 3) return std::numeric_limits<double>::quiet_NaN();
  std::sort(sample.begin(), sample.end());
  const boost::math::normal_distribution<double> standard;
  std::vector<double> q(count);
  for (std::size_t i = 0; i < count; ++i) {
    q[i] = boost::math::quantile(standard, (i + 1 - 0.375) / (count + 0.25));
  }
  const double n = static_cast<double>(count);
  const double mean_s = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
  const double mean_q = std::accumulate(q.begin(), q.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    sxy += (sample[i] - mean_s) * (q[i] - mean_q);
    sxx += (sample[i] - mean_s) * (sample[i] - mean_s);
    syy += (q[i] - mean_q) * (q[i] - mean_q);
  }
  return sxy / std::sqrt(sxx * syy);
}

NormalityReport run_normality(const ExperimentConfig& config) {
  config.validate();
  const int m = config.m_list.front();
  std::vector<std::optional<Eigen::VectorXd>> estimates(static_cast<std::size_t>(config.reps));
  parallel_for(estimates.size(), config.threads, [&](std::size_t r) {
    const SeriesSample s = simulate_series(
        config.spec, m, replication_seed(config.master_seed, m, static_cast<int>(r)));
    if (auto fit = try_fit(s, config.spec.n, config.solver)) {
      estimates[r] = fit->beta_hat.values();
    }
  });

  NormalityReport report;
  report.m = m;
  report.reps = config.reps;
  report.master_seed = config.master_seed;
  const Eigen::Index p = config.spec.beta.size();
  std::vector<Eigen::VectorXd> ok;
  for (const auto& e : estimates) {
    if (e) ok.push_back(*e);
    else ++report.failures;
  }
  report.fits = static_cast<int>(ok.size());
  report.flagged = flag_failures(report.failures, config.reps);
  report.insufficient = report.fits < kMinNormalitySample;
  report.estimates.resize(report.fits, p);
  for (int i = 0; i < report.fits; ++i) report.estimates.row(i) = ok[static_cast<std::size_t>(i)].transpose();

  const double nan = std::numeric_limits<double>::quiet_NaN();
  report.mean = Eigen::VectorXd::Constant(p, nan);
  report.mc_se = report.skewness = report.skewness_z = report.mean;
  report.excess_kurtosis = report.kurtosis_z = report.qq_correlation = report.mean;
  if (report.fits == 0) return report;

  const double count = report.fits;
  for (Eigen::Index j = 0; j < p; ++j) {
    const Eigen::VectorXd col = report.estimates.col(j);
    const double mean = col.mean();
    const Eigen::ArrayXd centered = col.array() - mean;
    const double m2 = centered.square().mean();
    const double m3 = centered.cube().mean();
    const double m4 = centered.square().square().mean();
    report.mean[j] = mean;
    if (report.fits >= 2) {
      report.mc_se[j] = std::sqrt(centered.square().sum() / (count - 1.0) / count);
    }
    if (m2 > 0.0) {
      report.skewness[j] = m3 / std::pow(m2, 1.5);
      report.excess_kurtosis[j] = m4 / (m2 * m2) - 3.0;
      report.skewness_z[j] = report.skewness[j] / std::sqrt(6.0 / count);
      report.kurtosis_z[j] = report.excess_kurtosis[j] / std::sqrt(24.0 / count);
      report.qq_correlation[j] = qq_correlation(std::vector<double>(col.begin(), col.end()));
    }
  }
  return report;
}

SizeReport run_size(const ExperimentConfig& config) {
  config.validate();
  const MonitoringSetup setup = prepare_monitoring(config);
  SizeReport report;
  report.thresholds = setup.thresholds;
  report.reps = config.reps;
  report.master_seed = config.master_seed;
  if (setup.reference && config.weighting == ExperimentWeighting::reference) {
    report.reference_A = setup.reference->A;
  }
  ExperimentConfig null_config = config;
  null_config.change.reset();

  for (int m : config.m_list) {
    const int horizon_k = static_cast<int>(std::floor(config.horizon * m + 1e-9));
    // sup_k statistic per replication and gamma; empty on fit failure.
    std::vector<std::vector<double>> sups(static_cast<std::size_t>(config.reps));
    parallel_for(sups.size(), config.threads, [&](std::size_t r) {
      const SeriesSample full = simulate_series(
          config.spec, m + horizon_k,
          replication_seed(config.master_seed, m, static_cast<int>(r)));
      const auto fit = try_fit(head(full, m), config.spec.n, config.solver);
      if (!fit) return;
      Eigen::MatrixXd A;
      try {
        A = monitoring_matrix(config, setup, *fit);
      } catch (const Error&) {
        return;
      }
      for (double gamma : config.gammas) {
        const auto path = statistic_path(null_config, full, m, *fit, A, gamma, nullptr, nullptr);
        sups[r].push_back(*std::max_element(path.begin(), path.end()));
      }
    });
    for (std::size_t g = 0; g < config.gammas.size(); ++g) {
      for (double alpha : config.alphas) {
        SizeCell cell;
        cell.m = m;
        cell.gamma = config.gammas[g];
        cell.alpha = alpha;
        cell.c = setup.thresholds.at(cell.gamma, alpha);
        int rejections = 0;
        for (const auto& s : sups) {
          if (s.empty()) {
            ++cell.failures;
            continue;
          }
          ++cell.reps_used;
          if (s[g] >= cell.c) ++rejections;
        }
        cell.rejection_rate = cell.reps_used ? static_cast<double>(rejections) / cell.reps_used : 0.0;
        cell.flagged = flag_failures(cell.failures, config.reps);
        report.cells.push_back(cell);
      }
    }
  }
  return report;
}

PowerReport run_power(const ExperimentConfig& config) {
  config.validate();
  if (!config.change) throw DomainError("power experiment needs a change specification");
  const MonitoringSetup setup = prepare_monitoring(config);
  PowerReport report;
  report.thresholds = setup.thresholds;
  report.reps = config.reps;
  report.change_at = config.change->at_k;
  report.master_seed = config.master_seed;
  if (setup.reference && config.weighting == ExperimentWeighting::reference) {
    report.reference_A = setup.reference->A;
  }
  const Eigen::Index p = config.spec.beta.size();

  struct Replication {
    bool ok = false;
    std::vector<std::vector<double>> paths;  // per gamma
    Eigen::VectorXd drift;
  };

  for (int m : config.m_list) {
    const int horizon_k = static_cast<int>(std::floor(config.horizon * m + 1e-9));
    const int change_k = config.change->at_k - 1;  // last pre-change index
    std::vector<Replication> runs(static_cast<std::size_t>(config.reps));
    parallel_for(runs.size(), config.threads, [&](std::size_t r) {
      const RegimeChange regime{m + config.change->at_k, config.change->beta};
      const SeriesSample full = simulate_series(
          config.spec, m + horizon_k,
          replication_seed(config.master_seed, m, static_cast<int>(r)),
          std::nullopt, regime);
      const auto fit = try_fit(head(full, m), config.spec.n, config.solver);
      if (!fit) return;
      Eigen::MatrixXd A;
      try {
        A = monitoring_matrix(config, setup, *fit);
      } catch (const Error&) {
        return;
      }
      Replication& run = runs[r];
      ScoreVector at_change = ScoreVector::Zero(p);
      ScoreVector at_end = ScoreVector::Zero(p);
      for (std::size_t g = 0; g < config.gammas.size(); ++g) {
        run.paths.push_back(statistic_path(config, full, m, *fit, A, config.gammas[g],
                                           g == 0 ? &at_change : nullptr,
                                           g == 0 ? &at_end : nullptr));
      }
      if (horizon_k > change_k) {
        run.drift = (at_end - at_change) / static_cast<double>(horizon_k - change_k);
      } else {
        run.drift = ScoreVector::Zero(p);
      }
      run.ok = true;
    });

    for (std::size_t g = 0; g < config.gammas.size(); ++g) {
      for (double alpha : config.alphas) {
        PowerCell cell;
        cell.m = m;
        cell.gamma = config.gammas[g];
        cell.alpha = alpha;
        cell.c = setup.thresholds.at(cell.gamma, alpha);
        cell.score_drift = Eigen::VectorXd::Zero(p);
        std::vector<double> detected;
        for (const Replication& run : runs) {
          if (!run.ok) {
            ++cell.failures;
            continue;
          }
          ++cell.reps_used;
          cell.score_drift += run.drift;
          const auto& path = run.paths[g];
          const auto hit = std::find_if(path.begin(), path.end(),
                                        [&](double s) { return s >= cell.c; });
          const int k = hit == path.end() ? 0 : static_cast<int>(hit - path.begin()) + 1;
          cell.detections.push_back(k);
          if (k > 0) detected.push_back(k);
        }
        if (cell.reps_used > 0) {
          cell.score_drift /= cell.reps_used;
          cell.detection_rate = static_cast<double>(detected.size()) / cell.reps_used;
        }
        cell.mean_detection =
            detected.empty() ? std::numeric_limits<double>::quiet_NaN()
                             : std::accumulate(detected.begin(), detected.end(), 0.0) /
                                   static_cast<double>(detected.size());
        cell.median_detection = median_of(detected);
        cell.flagged = flag_failures(cell.failures, config.reps);
        report.cells.push_back(std::move(cell));
      }
      for (int r = 0; r < std::min(config.trace_reps, config.reps); ++r) {
        const Replication& run = runs[static_cast<std::size_t>(r)];
        if (!run.ok) continue;
        report.traces.push_back({m, config.gammas[g], r, run.paths[g]});
      }
    }
  }
  return report;
}

}  // namespace binar
