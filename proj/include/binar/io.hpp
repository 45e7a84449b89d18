#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "binar/calibration.hpp"
#include "binar/dataprep.hpp"
#include "binar/estimation.hpp"
#include "binar/experiments.hpp"
#include "binar/model.hpp"
#include "binar/monitoring.hpp"

namespace binar {

/// Shortest decimal that parses back to the same double; "inf", "-inf" and
/// "nan" for non-finite values.
std::string format_double(double value);
double parse_double(std::string_view text, std::string_view what);
long long parse_integer(std::string_view text, std::string_view what);

std::vector<std::string> split_csv_line(std::string_view line);

// SeriesSample: header "t,x,w1,...,wl"; the t = 0 row leaves w cells empty.
void write_series_csv(std::ostream& out, const SeriesSample& series);
SeriesSample read_series_csv(std::istream& in);

// ThresholdTable: header "gamma,alpha,c,reps,grid_m,N,seed".
void write_threshold_csv(std::ostream& out, const ThresholdTable& table);
ThresholdTable read_threshold_csv(std::istream& in);

/// Incremental reader for monitoring input rows "k,x,w1,...,wl". The k
/// column must count 1, 2, 3, ...
class StreamCsvReader {
 public:
  StreamCsvReader(std::istream& in, Eigen::Index exo_dim);
  std::optional<StreamPoint> next();

 private:
  std::istream& in_;
  Eigen::Index exo_dim_;
  int expected_k_ = 1;
  int line_ = 1;
};

// RatePanel input: header "state,iso_year,week,rate".
RatePanel read_rate_panel(std::istream& in);

// BinomialSeries: "# n=<n>" line, then header "iso_year,week,x".
void write_binomial_series_csv(std::ostream& out, const BinomialSeries& series);
BinomialSeries read_binomial_series_csv(std::istream& in);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& path);

ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json model_spec_to_json(const ModelSpec& spec);

nlohmann::json fit_to_json(const FitResult& fit);
nlohmann::json comparison_to_json(const ModelComparison& comparison);
nlohmann::json monitor_result_to_json(const Monitor& monitor,
                                      const MonitorResult& result);

void write_consistency_csv(std::ostream& out, const ConsistencyReport& report);
void write_normality_csv(std::ostream& out, const NormalityReport& report);
void write_estimates_csv(std::ostream& out, const NormalityReport& report);
void write_size_csv(std::ostream& out, const SizeReport& report);
void write_power_csv(std::ostream& out, const PowerReport& report);
void write_traces_csv(std::ostream& out, const PowerReport& report);

}  // namespace binar
