#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "binar/error.hpp"
#include "binar/experiments.hpp"

using namespace binar;

namespace {

ExperimentConfig quick(std::vector<int> m_list, int reps) {
  ExperimentConfig c;
  c.m_list = std::move(m_list);
  c.reps = reps;
  c.master_seed = 4242;
  c.reference_length = 3000;
  c.calibration_reps = 400;
  c.calibration_grid_m = 100;
  return c;
}

ThresholdTable constant_table(double c, const std::vector<double>& gammas,
                              const std::vector<double>& alphas) {
  ThresholdTable t;
  for (double g : gammas) {
    for (double a : alphas) t.cells.push_back({g, a, c});
  }
  return t;
}

}  // namespace

TEST_CASE("seeds") {
  CHECK(replication_seed(1, 100, 0) != replication_seed(1, 100, 1));
  CHECK(replication_seed(1, 100, 0) != replication_seed(1, 200, 0));
  CHECK(replication_seed(1, 100, 0) != replication_seed(2, 100, 0));
  CHECK(replication_seed(9, 300, 7) == replication_seed(9, 300, 7));
}

TEST_CASE("consistency harness") {
  SUBCASE("one replication is the squared error of one fit") {
    const ExperimentConfig c = quick({300}, 1);
    const ConsistencyReport r = run_consistency(c);
    REQUIRE(r.rows.size() == 1);
    const SeriesSample s = simulate_series(c.spec, 300, replication_seed(c.master_seed, 300, 0));
    const FitResult fit = fit_mple(s, c.spec.n);
    const Eigen::VectorXd err = fit.beta_hat.values() - c.spec.beta.values();
    CHECK((r.rows[0].mse - err.cwiseAbs2()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("independent of thread count") {
    ExperimentConfig c = quick({200, 400}, 30);
    const ConsistencyReport a = run_consistency(c);
    c.threads = 4;
    const ConsistencyReport b = run_consistency(c);
    for (std::size_t i = 0; i < a.rows.size(); ++i) CHECK(a.rows[i].mse == b.rows[i].mse);
  }
}

TEST_CASE("normality harness") {
  SUBCASE("tiny sample is flagged") {
    const NormalityReport r = run_normality(quick({400}, 2));
    CHECK(r.insufficient);
    CHECK(r.estimates.rows() == 2);
  }
  SUBCASE("moments of the estimates") {
    const NormalityReport r = run_normality(quick({400}, 60));
    CHECK_FALSE(r.insufficient);
    CHECK(r.fits + r.failures == 60);
    const Eigen::VectorXd mean = r.estimates.colwise().mean();
    CHECK((mean - r.mean).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("qq correlation") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    std::vector<double> z(2000), e(2000);
    std::exponential_distribution<double> expo;
    for (int i = 0; i < 2000; ++i) {
      z[i] = normal(rng);
      e[i] = expo(rng);
    }
    CHECK(qq_correlation(z) > 0.995);
    CHECK(qq_correlation(e) < 0.95);
  }
}

TEST_CASE("size harness") {
  SUBCASE("infinite thresholds never reject") {
    ExperimentConfig c = quick({100}, 20);
    c.thresholds = constant_table(std::numeric_limits<double>::infinity(), c.gammas, c.alphas);
    const SizeReport r = run_size(c);
    for (const auto& cell : r.cells) CHECK(cell.rejection_rate == 0.0);
  }
  SUBCASE("zero-ish thresholds always reject") {
    ExperimentConfig c = quick({100}, 20);
    c.thresholds = constant_table(1e-300, c.gammas, c.alphas);
    const SizeReport r = run_size(c);
    for (const auto& cell : r.cells) CHECK(cell.rejection_rate == 1.0);
  }
  SUBCASE("calibrated on demand, deterministic across threads") {
    ExperimentConfig c = quick({100}, 40);
    const SizeReport a = run_size(c);
    c.threads = 3;
    const SizeReport b = run_size(c);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
      CHECK(a.cells[i].rejection_rate == b.cells[i].rejection_rate);
      CHECK(a.cells[i].c == b.cells[i].c);
    }
    CHECK(a.thresholds.reps == 400);
    CHECK(a.reference_A.rows() == 3);
    CHECK(a.cell(100, 0.25, 0.05).c == a.thresholds.at(0.25, 0.05));
    CHECK_THROWS_AS(a.cell(101, 0.25, 0.05), DomainError);
  }
}

TEST_CASE("power harness") {
  ExperimentConfig c = quick({100}, 30);
  c.alphas = {0.05};
  c.change = ChangeSpec{11, ParamVector(-1.0, 0.2, {0.4})};
  c.trace_reps = 2;
  const PowerReport r = run_power(c);
  CHECK(r.change_at == 11);
  CHECK(r.cells.size() == 3);
  CHECK(r.traces.size() == 6);
  for (const auto& cell : r.cells) {
    CHECK(cell.detections.size() == static_cast<std::size_t>(cell.reps_used));
    CHECK(cell.detection_rate > 0.8);
    CHECK(cell.score_drift.size() == 3);
  }
  // Under common streams a larger gamma never detects later on average here.
  CHECK(r.cell(100, 0.4, 0.05).mean_detection <= r.cell(100, 0.0, 0.05).mean_detection);

  ExperimentConfig none = c;
  none.change.reset();
  CHECK_THROWS_AS(run_power(none), DomainError);
}
