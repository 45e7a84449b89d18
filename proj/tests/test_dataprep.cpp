#include <doctest.h>

#include <cmath>
#include <fstream>

#include "binar/dataprep.hpp"
#include "binar/error.hpp"
#include "binar/io.hpp"

using namespace binar;

namespace {

RatePanel fixture_panel() {
  std::ifstream in(BINAR_TEST_DATA_DIR "/panel_2state.csv");
  REQUIRE(in);
  return read_rate_panel(in);
}

const EvaluationWindow kWindow{{2020, 1}, {2020, 6}};
const std::vector<std::string> kStates{"A", "B"};

RatePanel scaled(const RatePanel& panel, double factor) {
  std::vector<RateRow> rows = panel.rows();
  for (auto& r : rows) r.rate *= factor;
  return RatePanel(rows);
}

// Composite Simpson rule.
template <typename F>
double simpson(F f, double a, double b, int intervals) {
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// Upper tail of the chi-square density by direct integration; df = 1 is
// integrated in u = sqrt(t) to remove the singularity at zero.
double brute_chi_square_sf(double x, int df) {
  if (df == 1) {
    auto phi = [](double u) { return 2.0 * std::exp(-0.5 * u * u) / std::sqrt(2 * M_PI); };
    return simpson(phi, std::sqrt(x), std::sqrt(x) + 40.0, 200000);
  }
  const double k = 0.5 * df;
  auto dens = [k](double t) {
    return std::exp((k - 1) * std::log(t) - 0.5 * t - k * std::log(2.0) - std::lgamma(k));
  };
  return simpson(dens, x, x + 400.0, 400000);
}

}  // namespace

TEST_CASE("baseline means") {
  const RatePanel panel = fixture_panel();
  const BaselineTable one = compute_baseline(panel, {2018});
  CHECK(one.at("A", 3) == 3.0);
  CHECK(one.at("B", 3) == 10.0);
  const BaselineTable two = compute_baseline(panel, {2018, 2019});
  CHECK(two.at("A", 3) == 4.0);
  CHECK(two.at("B", 1) == 15.0);

  std::vector<RateRow> rows{{"S", 2001, 10, 1.0}, {"S", 2002, 10, 3.0}};
  CHECK(compute_baseline(RatePanel(rows), {2001, 2002}).at("S", 10) == 2.0);
}

TEST_CASE("week 53 handling") {
  std::vector<RateRow> rows;
  for (int y : {2017, 2018, 2019}) {
    for (int w = 50; w <= 52; ++w) rows.push_back({"S", y, w, 1.0 + w});
  }
  // ISO 2020 has 53 weeks.
  CHECK(iso_weeks_in_year(2020) == 53);
  CHECK(iso_weeks_in_year(2019) == 52);
  CHECK(iso_weeks_in_year(2015) == 53);
  for (int w = 50; w <= 53; ++w) rows.push_back({"S", 2020, w, 60.0});
  const RatePanel panel(rows);
  const EvaluationWindow window{{2020, 50}, {2021, 1}};
  CHECK(window.weeks().size() == 5);

  CHECK_THROWS_AS(compute_baseline(panel, {2017, 2018, 2019}, {"S"}, window, Week53Policy::strict),
                  MissingBaselineError);
  try {
    compute_baseline(panel, {2017, 2018, 2019}, {"S"}, window, Week53Policy::strict);
  } catch (const MissingBaselineError& e) {
    REQUIRE(e.missing().size() == 2);  // weeks 53 and 1
    CHECK(e.missing()[0].second == 1);
    CHECK(e.missing()[1].second == 53);
  }
  const BaselineTable mapped = compute_baseline(panel, {2017, 2018, 2019});
  CHECK(mapped.at("S", 53) == mapped.at("S", 52));
  const BaselineTable strict = compute_baseline(panel, {2017, 2018, 2019}, Week53Policy::strict);
  CHECK_THROWS_AS(strict.at("S", 53), MissingBaselineError);
}

TEST_CASE("binarization") {
  const RatePanel panel = fixture_panel();
  const BaselineTable base = compute_baseline(panel, {2018, 2019}, kStates, kWindow);

  SUBCASE("hand-enumerated fixture") {
    const BinomialSeries s = binarize_and_sum(panel, base, kStates, kWindow);
    CHECK(s.n == 2);
    CHECK(s.x == std::vector<int>{2, 0, 0, 2, 1, 1});
    REQUIRE(s.labels.size() == 6);
    CHECK(s.labels.front() == IsoWeek{2020, 1});
    CHECK(s.labels.back() == IsoWeek{2020, 6});
  }

  SUBCASE("ties and saturation") {
    std::vector<RateRow> rows;
    for (int w = 1; w <= 4; ++w) {
      rows.push_back({"A", 2019, w, 2.0});
      rows.push_back({"B", 2019, w, 5.0});
      rows.push_back({"A", 2020, w, 2.0});
      rows.push_back({"B", 2020, w, 5.0});
      rows.push_back({"A", 2021, w, 2.5});
      rows.push_back({"B", 2021, w, 9.0});
    }
    const RatePanel p(rows);
    const BaselineTable b = compute_baseline(p, {2019});
    CHECK(binarize_and_sum(p, b, kStates, {{2020, 1}, {2020, 4}}).x == std::vector<int>(4, 0));
    CHECK(binarize_and_sum(p, b, kStates, {{2021, 1}, {2021, 4}}).x == std::vector<int>(4, 2));
  }

  SUBCASE("scale equivariance") {
    const BinomialSeries ref = binarize_and_sum(panel, base, kStates, kWindow);
    for (double f : {0.5, 4.0, 1024.0}) {
      const RatePanel p = scaled(panel, f);
      const BaselineTable b = compute_baseline(p, {2018, 2019});
      CHECK(binarize_and_sum(p, b, kStates, kWindow).x == ref.x);
    }
  }

  SUBCASE("coverage gaps") {
    std::vector<RateRow> rows = panel.rows();
    std::erase_if(rows, [](const RateRow& r) { return r.state == "B" && r.iso_year == 2020 && r.week == 4; });
    const RatePanel p(rows);
    try {
      binarize_and_sum(p, base, kStates, kWindow);
      FAIL("expected a coverage error");
    } catch (const CoverageError& e) {
      REQUIRE(e.gaps().size() == 1);
      CHECK(e.gaps()[0].state == "B");
      CHECK(e.gaps()[0].week == 4);
    }
  }

  SUBCASE("panel validation") {
    CHECK_THROWS_AS(RatePanel({{"A", 2020, 1, 1.0}, {"A", 2020, 1, 2.0}}), DomainError);
    CHECK_THROWS_AS(RatePanel({{"A", 2020, 54, 1.0}}), DomainError);
    CHECK_THROWS_AS(RatePanel({{"A", 2020, 3, -1.0}}), DomainError);
  }
}

TEST_CASE("i.i.d. binomial fit") {
  const IidBinomialFit half = fit_iid_binomial(std::vector<int>(7, 3), 6);
  CHECK(half.pi_hat == 0.5);
  const IidBinomialFit one = fit_iid_binomial(std::vector<int>{3}, 6);
  CHECK(one.pi_hat == 0.5);
  CHECK(one.log_lik == doctest::Approx(std::log(20.0) + 6 * std::log(0.5)).epsilon(1e-14));
  CHECK(one.aic == doctest::Approx(2 - 2 * one.log_lik));
  CHECK(fit_iid_binomial(std::vector<int>{0, 0, 0}, 4).boundary);
  CHECK(fit_iid_binomial(std::vector<int>{4, 4}, 4).boundary);
  CHECK(fit_iid_binomial(std::vector<int>{4, 4}, 4).log_lik == 0.0);
}

TEST_CASE("model comparison") {
  SUBCASE("AR(1) data favour the AR(1) model") {
    ModelSpec spec;
    spec.n = 6;
    spec.beta = ParamVector(-2.0, 0.8);
    spec.exo.dim = 0;
    const SeriesSample s = simulate_series(spec, 500, 12);
    BinomialSeries b{s.x, 6, {}};
    const ModelComparison c = model_comparison(b);
    CHECK(c.aic_simple - c.aic_ar1 > 0.0);
    CHECK(c.p_value < 1e-6);
    CHECK(c.ar1.log_pl >= c.simple.log_lik - 1e-6);
  }

  SUBCASE("nesting at phi1 = 0") {
    ModelSpec spec;
    spec.n = 6;
    spec.beta = ParamVector(-0.4, 0.0);
    spec.exo.dim = 0;
    const SeriesSample s = simulate_series(spec, 300, 13);
    BinomialSeries b{s.x, 6, {}};
    const ModelComparison c = model_comparison(b);
    const double pi = c.simple.pi_hat;
    const double constrained = log_partial_likelihood(to_series_sample(b), 6,
                                                      ParamVector(std::log(pi / (1 - pi)), 0.0));
    CHECK(std::abs(constrained - c.simple.log_lik) < 1e-6);
    CHECK(c.lr_stat >= -1e-6);
  }

  SUBCASE("null rejection rate") {
    ModelSpec spec;
    spec.n = 6;
    spec.beta = ParamVector(std::log(0.4 / 0.6), 0.0);
    spec.exo.dim = 0;
    int above = 0;
    for (int seed = 0; seed < 100; ++seed) {
      const SeriesSample s = simulate_series(spec, 200, 7000 + seed);
      if (model_comparison(BinomialSeries{s.x, 6, {}}).p_value > 0.05) ++above;
    }
    CHECK(above >= 90);
  }
}

TEST_CASE("chi-square survival") {
  CHECK(chi_square_sf(3.841, 1) == doctest::Approx(0.05).epsilon(1e-3 / 0.05));
  CHECK(std::abs(chi_square_sf(3.841, 1) - 0.05) < 1e-3);
  CHECK(chi_square_sf(0.0, 1) == 1.0);
  for (int df : {1, 2, 3, 5}) {
    for (double x : {0.1, 0.5, 1.0, 2.5, 5.0, 10.0, 20.0, 35.0, 50.0}) {
      CHECK(std::abs(chi_square_sf(x, df) - brute_chi_square_sf(x, df)) < 1e-8);
    }
  }
}
