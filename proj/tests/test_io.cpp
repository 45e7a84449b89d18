#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "binar/error.hpp"
#include "binar/io.hpp"

using namespace binar;

TEST_CASE("double formatting round-trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = unif(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(parse_double(format_double(v), "v") == v);
  }
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(std::isinf(parse_double("inf", "v")));
  CHECK(parse_double(" -inf ", "v") < 0);
  CHECK_THROWS_AS(parse_double("1.5x", "v"), ParseError);
  CHECK_THROWS_AS(parse_integer("2.5", "v"), ParseError);
  CHECK(split_csv_line("a, b,,c").size() == 4);
}

TEST_CASE("series csv") {
  const SeriesSample s = simulate_series(benchmark_spec(), 50, 3);
  std::stringstream buf;
  write_series_csv(buf, s);
  const SeriesSample back = read_series_csv(buf);
  CHECK(back.x == s.x);
  CHECK(back.w == s.w);

  std::stringstream bad("t,x,w1\n0,3,\n2,4,0.5\n");
  CHECK_THROWS_AS(read_series_csv(bad), ParseError);
  std::stringstream header("time,x\n");
  CHECK_THROWS_AS(read_series_csv(header), ParseError);
}

TEST_CASE("threshold csv") {
  ThresholdTable t;
  t.reps = 10000;
  t.grid_m = 1000;
  t.horizon = 3;
  t.seed = 18446744073709551615ULL;
  t.cells = {{0.0, 0.05, 7.123456789012345}, {0.4, 0.01, 13.1}};
  std::stringstream buf;
  write_threshold_csv(buf, t);
  const ThresholdTable back = read_threshold_csv(buf);
  REQUIRE(back.cells.size() == 2);
  CHECK(back.cells[0].c == t.cells[0].c);
  CHECK(back.seed == t.seed);
  CHECK(back.reps == 10000);
  CHECK(back.at(0.4, 0.01) == 13.1);
}

TEST_CASE("stream reader") {
  std::stringstream in("k,x,w1\n1,3,0.9\n2,4,1.1\n\n3,0,1.0\n");
  StreamCsvReader reader(in, 1);
  int count = 0;
  while (auto p = reader.next()) {
    ++count;
    CHECK(p->w.size() == 1);
  }
  CHECK(count == 3);

  std::stringstream gap("k,x,w1\n1,3,0.9\n3,4,1.1\n");
  StreamCsvReader r2(gap, 1);
  CHECK(r2.next().has_value());
  CHECK_THROWS_AS(r2.next(), ParseError);

  std::stringstream wide("k,x,w1,w2\n");
  CHECK_THROWS_AS(StreamCsvReader(wide, 1), ParseError);
}

TEST_CASE("binomial series csv") {
  BinomialSeries s{{2, 0, 0, 2, 1, 1}, 2, {}};
  for (int w = 1; w <= 6; ++w) s.labels.push_back({2020, w});
  std::stringstream buf;
  write_binomial_series_csv(buf, s);
  const BinomialSeries back = read_binomial_series_csv(buf);
  CHECK(back.x == s.x);
  CHECK(back.n == 2);
  CHECK(back.labels == s.labels);
}

TEST_CASE("model spec json") {
  const ModelSpec spec = benchmark_spec();
  const ModelSpec back = model_spec_from_json(model_spec_to_json(spec));
  CHECK(back.n == spec.n);
  CHECK(back.beta.values() == spec.beta.values());
  CHECK(back.exo.sd == spec.exo.sd);
  CHECK(back.exo.dim == 1);

  nlohmann::json j = model_spec_to_json(spec);
  j["exo"]["sd"] = "wide";
  try {
    model_spec_from_json(j);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "/exo/sd");
  }
  j = model_spec_to_json(spec);
  j.erase("n");
  CHECK_THROWS_AS(model_spec_from_json(j), ConfigError);
}

TEST_CASE("matrix json") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 0.25, 0.25, 3;
  CHECK(matrix_from_json(matrix_to_json(m), "/A") == m);
  CHECK_THROWS_AS(matrix_from_json(nlohmann::json::parse("[[1,2],[3]]"), "/A"), ConfigError);
}
