#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "binar/error.hpp"
#include "binar/model.hpp"

using namespace binar;

namespace {

ModelSpec constant_spec(int n, double phi0) {
  ModelSpec spec;
  spec.n = n;
  spec.beta = ParamVector(phi0, 0.0);
  spec.exo.dim = 0;
  return spec;
}

double binom_pmf(int n, int k, double p) {
  const double lc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  return std::exp(lc + k * std::log(p) + (n - k) * std::log1p(-p));
}

// Brute-force P[j][i] for one clamped-normal covariate: midpoint rule on a
// fine grid over mean +- 12 sd plus the probability atoms at the clamps.
Eigen::MatrixXd brute_transition(const ModelSpec& spec) {
  const int n = spec.n;
  const auto& e = spec.exo;
  const double b0 = spec.beta.phi0(), b1 = spec.beta.phi1(), g = spec.beta.gamma(0);
  auto prob = [&](int j, double w) { return 1.0 / (1.0 + std::exp(-(b0 + b1 * j + g * w))); };
  auto cdf = [&](double w) { return 0.5 * std::erfc(-(w - e.mean) / (e.sd * std::sqrt(2.0))); };
  const double lo = std::max(e.clamp_lo, e.mean - 12 * e.sd);
  const double hi = std::min(e.clamp_hi, e.mean + 12 * e.sd);
  const int cells = 200000;
  const double h = (hi - lo) / cells;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int j = 0; j <= n; ++j) {
    for (int c = 0; c < cells; ++c) {
      const double w = lo + (c + 0.5) * h;
      const double dens = std::exp(-0.5 * std::pow((w - e.mean) / e.sd, 2)) /
                          (e.sd * std::sqrt(2 * M_PI));
      for (int i = 0; i <= n; ++i) P(j, i) += h * dens * binom_pmf(n, i, prob(j, w));
    }
    const double atom_lo = cdf(e.clamp_lo);
    const double atom_hi = 1.0 - cdf(e.clamp_hi);
    for (int i = 0; i <= n; ++i) {
      P(j, i) += atom_lo * binom_pmf(n, i, prob(j, e.clamp_lo)) +
                 atom_hi * binom_pmf(n, i, prob(j, e.clamp_hi));
    }
  }
  return P;
}

}  // namespace

TEST_CASE("link and its inverse") {
  CHECK(link_eval(5, 10) == 0.0);
  CHECK(link_eval(7.5, 10) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(std::abs(inverse_link(link_eval(3.2, 10), 10) - 3.2) < 1e-12);
  for (int i = 1; i < 1000; ++i) {
    const double mu = 10.0 * i / 1000.0;
    CHECK(std::abs(inverse_link(link_eval(mu, 10), 10) - mu) < 1e-10);
  }
  CHECK_THROWS_AS(link_eval(0.0, 10), DomainError);
  CHECK_THROWS_AS(link_eval(10.0, 10), DomainError);
}

TEST_CASE("success probability") {
  const Eigen::VectorXd z0 = (Eigen::VectorXd(2) << 1, 0).finished();
  CHECK(success_prob(ParamVector(0, 0), z0) == 0.5);
  CHECK(success_prob(ParamVector(std::log(3.0), 0), z0) == doctest::Approx(0.75).epsilon(1e-15));
  const Eigen::VectorXd z = (Eigen::VectorXd(3) << 1, 0, 1).finished();
  CHECK(success_prob(ParamVector(-1, 0.1, {0.4}), z) ==
        doctest::Approx(1.0 / (1.0 + std::exp(0.6))).epsilon(1e-15));
  CHECK(success_prob(ParamVector(-1, 0.1, {0.4}), z) == doctest::Approx(0.35434).epsilon(1e-5));
  CHECK_THROWS_AS(success_prob(ParamVector(0, 0), z), DimensionError);

  SUBCASE("strictly inside (0, 1) across the box") {
    const ModelSpec spec = benchmark_spec();
    const double eps = success_prob_floor(spec);
    CHECK(eps > 0.0);
    for (double eta : {-80.0, -40.0, -1.0, 0.0, 1.0, 40.0, 80.0}) {
      const double p = success_prob(ParamVector(eta, 0), z0);
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}

TEST_CASE("regressor assembly") {
  const Eigen::VectorXd a = build_regressor(3, (Eigen::VectorXd(1) << 0.9).finished());
  CHECK(a.size() == 3);
  CHECK(a[0] == 1);
  CHECK(a[1] == 3);
  CHECK(a[2] == 0.9);
  const Eigen::VectorXd b = build_regressor(0, Eigen::VectorXd(0));
  CHECK(b.size() == 2);
  CHECK(b[1] == 0);
  const Eigen::VectorXd c = build_regressor(10, (Eigen::VectorXd(2) << 0.0, 2.5).finished());
  CHECK(c.size() == 4);
  CHECK(c[3] == 2.5);
}

TEST_CASE("spec validation") {
  ModelSpec spec = benchmark_spec();
  CHECK_NOTHROW(spec.validate());
  spec.n = 0;
  CHECK_THROWS_AS(spec.validate(), DomainError);
  spec = benchmark_spec();
  spec.beta = ParamVector(0, 0);
  CHECK_THROWS_AS(spec.validate(), DimensionError);
  spec = benchmark_spec();
  spec.beta = ParamVector(25, 0, {0});
  CHECK_THROWS_AS(spec.validate(), DomainError);
  spec = benchmark_spec();
  spec.exo.clamp_lo = 3;
  spec.exo.clamp_hi = 1;
  CHECK_THROWS_AS(spec.validate(), DomainError);
  CHECK_THROWS_AS(ParamVector(std::nan(""), 0), DomainError);
}

TEST_CASE("simulation") {
  const ModelSpec spec = benchmark_spec();

  SUBCASE("deterministic given the seed") {
    const auto a = simulate_series(spec, 500, 42);
    const auto b = simulate_series(spec, 500, 42);
    CHECK(a.x == b.x);
    CHECK(a.w == b.w);
    const auto c = simulate_series(spec, 500, 43);
    CHECK(a.x != c.x);
  }

  SUBCASE("shape and ranges") {
    const auto s = simulate_series(spec, 1000, 1);
    CHECK(s.length() == 1000);
    CHECK(s.w.rows() == 1000);
    CHECK(s.w.cols() == 1);
    CHECK_NOTHROW(s.validate(spec.n));
    CHECK(s.w.minCoeff() >= 0.0);
    CHECK(s.w.maxCoeff() <= 10.0);
  }

  SUBCASE("explicit init is X_0") {
    const auto s = simulate_series(spec, 10, 5, 7);
    CHECK(s.x[0] == 7);
    CHECK_THROWS_AS(simulate_series(spec, 10, 5, 11), DomainError);
    CHECK_THROWS_AS(simulate_series(spec, 0, 5), DomainError);
  }

  SUBCASE("saturated logistic gives X = n") {
    const auto s = simulate_series(constant_spec(10, 20.0), 100, 9);
    for (int t = 1; t <= 100; ++t) CHECK(s.x[t] == 10);
  }

  SUBCASE("regime change alters the law from at_t on") {
    RegimeChange change{200, ParamVector(3.0, 0.0, {0.0})};
    const auto base = simulate_series(spec, 400, 11);
    const auto switched = simulate_series(spec, 400, 11, std::nullopt, change);
    for (int t = 0; t < 200; ++t) CHECK(base.x[t] == switched.x[t]);
    double late = 0;
    for (int t = 200; t <= 400; ++t) late += switched.x[t];
    CHECK(late / 201 > 8.5);
  }
}

TEST_CASE("stationary oracle") {
  SUBCASE("constant pi") {
    const auto r = stationary_oracle(constant_spec(4, 0.0));
    const double expected[] = {1, 4, 6, 4, 1};
    for (int i = 0; i <= 4; ++i) {
      CHECK(r.pmf[i] == doctest::Approx(expected[i] / 16).epsilon(1e-12));
      for (int j = 0; j <= 4; ++j) {
        CHECK(r.transition(j, i) == doctest::Approx(expected[i] / 16).epsilon(1e-12));
      }
    }
  }

  SUBCASE("benchmark spec") {
    const ModelSpec spec = benchmark_spec();
    const auto r = stationary_oracle(spec);
    for (int j = 0; j <= spec.n; ++j) {
      CHECK(std::abs(r.transition.row(j).sum() - 1.0) < 1e-12);
    }
    const Eigen::RowVectorXd mu = r.pmf.transpose();
    CHECK((mu * r.transition - mu).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(r.pmf.sum() - 1.0) < 1e-12);
    CHECK(r.pmf.minCoeff() >= 0.0);

    const Eigen::MatrixXd brute = brute_transition(spec);
    CHECK((brute - r.transition).cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("simulated mean matches the stationary mean") {
    const ModelSpec spec = benchmark_spec();
    const auto r = stationary_oracle(spec);
    double oracle_mean = 0;
    for (int i = 0; i <= spec.n; ++i) oracle_mean += i * r.pmf[i];
    const auto s = simulate_series(spec, 100000, 2024);
    const double mean = std::accumulate(s.x.begin() + 1, s.x.end(), 0.0) / s.length();
    CHECK(std::abs(mean - oracle_mean) < 0.05);
  }

  SUBCASE("limits") {
    CHECK_THROWS_AS(stationary_oracle(constant_spec(31, 0.0)), DomainError);
  }
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
  Eigen::VectorXd x, w;
  gauss_legendre(8, -1.0, 2.0, x, w);
  double integral = 0;
  for (int i = 0; i < 8; ++i) integral += w[i] * std::pow(x[i], 15);
  CHECK(integral == doctest::Approx((std::pow(2.0, 16) - 1.0) / 16.0).epsilon(1e-12));
}
