#include "binar/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "binar/error.hpp"

namespace binar {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

void expect_header(std::istream& in, std::string_view expected_prefix, std::string& line) {
  if (!read_line(in, line)) throw ParseError("empty input; expected header '" +
                                             std::string(expected_prefix) + "'");
  if (std::string_view(line).substr(0, expected_prefix.size()) != expected_prefix) {
    throw ParseError("bad header '" + line + "'; expected '" + std::string(expected_prefix) + "'");
  }
}

std::string at_line(int line) { return "line " + std::to_string(line); }

const nlohmann::json& require(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(path + "/" + key, "required field is missing");
  }
  return j.at(key);
}

double number_at(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

int integer_at(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

nlohmann::json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view what) {
  text = trim(text);
  if (text == "inf" || text == "+inf" || text == "Infinity") return std::numeric_limits<double>::infinity();
  if (text == "-inf" || text == "-Infinity") return -std::numeric_limits<double>::infinity();
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto res = std::from_chars(first, text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError(std::string(what) + ": cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

long long parse_integer(std::string_view text, std::string_view what) {
  text = trim(text);
  long long value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError(std::string(what) + ": cannot parse '" + std::string(text) + "' as an integer");
  }
  return value;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.emplace_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

void write_series_csv(std::ostream& out, const SeriesSample& series) {
  out << "t,x";
  for (Eigen::Index j = 0; j < series.w.cols(); ++j) out << ",w" << (j + 1);
  out << '\n';
  for (int t = 0; t <= series.length(); ++t) {
    out << t << ',' << series.x[static_cast<std::size_t>(t)];
    for (Eigen::Index j = 0; j < series.w.cols(); ++j) {
      out << ',';
      if (t > 0) out << format_double(series.w(t - 1, j));
    }
    out << '\n';
  }
}

SeriesSample read_series_csv(std::istream& in) {
  std::string line;
  expect_header(in, "t,x", line);
  const auto header = split_csv_line(line);
  const std::size_t l = header.size() - 2;
  for (std::size_t j = 0; j < l; ++j) {
    if (header[2 + j] != "w" + std::to_string(j + 1)) {
      throw ParseError("series header column " + std::to_string(j + 3) + " should be w" +
                       std::to_string(j + 1));
    }
  }
  std::vector<int> x;
  std::vector<std::vector<double>> w;
  int lineno = 1;
  while (read_line(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(at_line(lineno) + ": expected " + std::to_string(header.size()) + " fields");
    }
    const long long t = parse_integer(cells[0], at_line(lineno) + " t");
    if (t != static_cast<long long>(x.size())) {
      throw ParseError(at_line(lineno) + ": time index " + std::to_string(t) + " out of sequence");
    }
    x.push_back(static_cast<int>(parse_integer(cells[1], at_line(lineno) + " x")));
    if (t > 0) {
      std::vector<double> row(l);
      for (std::size_t j = 0; j < l; ++j) row[j] = parse_double(cells[2 + j], at_line(lineno) + " w");
      w.push_back(std::move(row));
    }
  }
  if (x.empty()) throw ParseError("series has no rows");
  SeriesSample series;
  series.x = std::move(x);
  series.w.resize(static_cast<Eigen::Index>(w.size()), static_cast<Eigen::Index>(l));
  for (std::size_t t = 0; t < w.size(); ++t) {
    for (std::size_t j = 0; j < l; ++j) {
      series.w(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = w[t][j];
    }
  }
  return series;
}

void write_threshold_csv(std::ostream& out, const ThresholdTable& table) {
  out << "gamma,alpha,c,reps,grid_m,N,seed\n";
  for (const auto& cell : table.cells) {
    out << format_double(cell.gamma) << ',' << format_double(cell.alpha) << ','
        << format_double(cell.c) << ',' << table.reps << ',' << table.grid_m << ','
        << format_double(table.horizon) << ',' << table.seed << '\n';
  }
}

ThresholdTable read_threshold_csv(std::istream& in) {
  std::string line;
  expect_header(in, "gamma,alpha,c,reps,grid_m,N,seed", line);
  ThresholdTable table;
  int lineno = 1;
  bool first = true;
  while (read_line(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 7) throw ParseError(at_line(lineno) + ": expected 7 fields");
    const std::string where = at_line(lineno);
    ThresholdTable::Cell cell{parse_double(cells[0], where + " gamma"),
                              parse_double(cells[1], where + " alpha"),
                              parse_double(cells[2], where + " c")};
    const int reps = static_cast<int>(parse_integer(cells[3], where + " reps"));
    const int grid_m = static_cast<int>(parse_integer(cells[4], where + " grid_m"));
    const double horizon = parse_double(cells[5], where + " N");
    std::uint64_t seed = 0;
    const std::string_view s = trim(cells[6]);
    if (std::from_chars(s.data(), s.data() + s.size(), seed).ec != std::errc()) {
      throw ParseError(where + ": bad seed");
    }
    if (first) {
      table.reps = reps;
      table.grid_m = grid_m;
      table.horizon = horizon;
      table.seed = seed;
      first = false;
    } else if (reps != table.reps || grid_m != table.grid_m || horizon != table.horizon ||
               seed != table.seed) {
      throw ParseError(where + ": metadata differs from the first row");
    }
    table.cells.push_back(cell);
  }
  return table;
}

StreamCsvReader::StreamCsvReader(std::istream& in, Eigen::Index exo_dim)
    : in_(in), exo_dim_(exo_dim) {
  std::string line;
  expect_header(in_, "k,x", line);
  const auto header = split_csv_line(line);
  if (static_cast<Eigen::Index>(header.size()) != 2 + exo_dim_) {
    throw ParseError("stream header has " + std::to_string(header.size()) + " columns; expected " +
                     std::to_string(2 + exo_dim_));
  }
}

std::optional<StreamPoint> StreamCsvReader::next() {
  std::string line;
  while (read_line(in_, line)) {
    ++line_;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (static_cast<Eigen::Index>(cells.size()) != 2 + exo_dim_) {
      throw ParseError(at_line(line_) + ": expected " + std::to_string(2 + exo_dim_) + " fields");
    }
    const long long k = parse_integer(cells[0], at_line(line_) + " k");
    if (k != expected_k_) {
      throw ParseError(at_line(line_) + ": k = " + std::to_string(k) + ", expected " +
                       std::to_string(expected_k_));
    }
    ++expected_k_;
    StreamPoint point;
    point.x = static_cast<int>(parse_integer(cells[1], at_line(line_) + " x"));
    point.w.resize(exo_dim_);
    for (Eigen::Index j = 0; j < exo_dim_; ++j) {
      point.w[j] = parse_double(cells[static_cast<std::size_t>(2 + j)], at_line(line_) + " w");
    }
    return point;
  }
  return std::nullopt;
}

RatePanel read_rate_panel(std::istream& in) {
  std::string line;
  expect_header(in, "state,iso_year,week,rate", line);
  std::vector<RateRow> rows;
  int lineno = 1;
  while (read_line(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw ParseError(at_line(lineno) + ": expected 4 fields");
    const std::string where = at_line(lineno);
    rows.push_back({cells[0], static_cast<int>(parse_integer(cells[1], where + " iso_year")),
                    static_cast<int>(parse_integer(cells[2], where + " week")),
                    parse_double(cells[3], where + " rate")});
  }
  return RatePanel(std::move(rows));
}

void write_binomial_series_csv(std::ostream& out, const BinomialSeries& series) {
  out << "# n=" << series.n << '\n' << "iso_year,week,x\n";
  for (std::size_t t = 0; t < series.x.size(); ++t) {
    out << series.labels[t].iso_year << ',' << series.labels[t].week << ',' << series.x[t] << '\n';
  }
}

BinomialSeries read_binomial_series_csv(std::istream& in) {
  std::string line;
  if (!read_line(in, line) || line.rfind("# n=", 0) != 0) {
    throw ParseError("binomial series must start with a '# n=<n>' line");
  }
  BinomialSeries series;
  series.n = static_cast<int>(parse_integer(std::string_view(line).substr(4), "n"));
  expect_header(in, "iso_year,week,x", line);
  int lineno = 2;
  while (read_line(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) throw ParseError(at_line(lineno) + ": expected 3 fields");
    const std::string where = at_line(lineno);
    series.labels.push_back({static_cast<int>(parse_integer(cells[0], where + " iso_year")),
                             static_cast<int>(parse_integer(cells[1], where + " week"))});
    const int x = static_cast<int>(parse_integer(cells[2], where + " x"));
    if (x < 0 || x > series.n) throw ParseError(where + ": x outside [0, n]");
    series.x.push_back(x);
  }
  return series;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_json(v[i]));
  return out;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw ConfigError(path, "expected a non-empty array of rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string row_path = path + "/" + std::to_string(r);
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(row_path, "ragged matrix row");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number_at(j[r][c], row_path + "/" + std::to_string(c));
    }
  }
  return m;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("", "configuration must be a JSON object");
  ModelSpec spec;
  spec.n = integer_at(require(j, "n", ""), "/n");
  const auto& beta = require(j, "beta", "");
  if (!beta.is_array() || beta.size() < 2) {
    throw ConfigError("/beta", "expected an array (phi0, phi1, gamma...)");
  }
  Eigen::VectorXd values(static_cast<Eigen::Index>(beta.size()));
  for (std::size_t i = 0; i < beta.size(); ++i) {
    values[static_cast<Eigen::Index>(i)] = number_at(beta[i], "/beta/" + std::to_string(i));
  }
  spec.beta = ParamVector(values);
  spec.exo.dim = static_cast<int>(values.size()) - 2;
  if (j.contains("exo")) {
    const auto& exo = j.at("exo");
    if (!exo.is_object()) throw ConfigError("/exo", "expected an object");
    if (exo.contains("dist")) {
      if (!exo.at("dist").is_string()) throw ConfigError("/exo/dist", "expected a string");
      spec.exo.dist = exo.at("dist").get<std::string>();
    }
    spec.exo.mean = number_at(require(exo, "mean", "/exo"), "/exo/mean");
    spec.exo.sd = number_at(require(exo, "sd", "/exo"), "/exo/sd");
    spec.exo.clamp_lo = number_at(require(exo, "clamp_lo", "/exo"), "/exo/clamp_lo");
    spec.exo.clamp_hi = number_at(require(exo, "clamp_hi", "/exo"), "/exo/clamp_hi");
    if (exo.contains("dim") && integer_at(exo.at("dim"), "/exo/dim") != spec.exo.dim) {
      throw ConfigError("/exo/dim", "does not match the length of beta minus 2");
    }
  } else if (spec.exo.dim > 0) {
    throw ConfigError("/exo", "required when beta has exogenous coefficients");
  }
  if (j.contains("burn_in")) spec.burn_in = integer_at(j.at("burn_in"), "/burn_in");
  if (j.contains("box_bound")) spec.box_bound = number_at(j.at("box_bound"), "/box_bound");
  try {
    spec.validate();
  } catch (const Error& e) {
    throw ConfigError("", e.what());
  }
  return spec;
}

nlohmann::json model_spec_to_json(const ModelSpec& spec) {
  return {{"n", spec.n},
          {"beta", vector_to_json(spec.beta.values())},
          {"exo",
           {{"dist", spec.exo.dist},
            {"mean", spec.exo.mean},
            {"sd", spec.exo.sd},
            {"clamp_lo", spec.exo.clamp_lo},
            {"clamp_hi", spec.exo.clamp_hi},
            {"dim", spec.exo.dim}}},
          {"burn_in", spec.burn_in},
          {"box_bound", spec.box_bound}};
}

nlohmann::json fit_to_json(const FitResult& fit) {
  return {{"beta_hat", vector_to_json(fit.beta_hat.values())},
          {"standard_errors", vector_to_json(fit.standard_errors())},
          {"covariance", matrix_to_json(fit.covariance)},
          {"sigma0_hat", matrix_to_json(fit.sigma0_hat)},
          {"log_pl", number_json(fit.log_pl)},
          {"aic", number_json(fit.aic)},
          {"m", fit.m},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"hit_boundary", fit.hit_boundary},
          {"final_score_norm", number_json(fit.final_score_norm)}};
}

nlohmann::json comparison_to_json(const ModelComparison& c) {
  return {{"aic_simple", number_json(c.aic_simple)},
          {"aic_ar1", number_json(c.aic_ar1)},
          {"log_lik_simple", number_json(c.simple.log_lik)},
          {"log_pl_ar1", number_json(c.ar1.log_pl)},
          {"pi_hat", number_json(c.simple.pi_hat)},
          {"pi_hat_on_boundary", c.simple.boundary},
          {"lr_stat", number_json(c.lr_stat)},
          {"df", c.df},
          {"p_value", number_json(c.p_value)},
          {"ar1_fit", fit_to_json(c.ar1)}};
}

nlohmann::json monitor_result_to_json(const Monitor& monitor, const MonitorResult& result) {
  nlohmann::json j = {{"m", monitor.config().m},
                      {"N", number_json(monitor.config().horizon)},
                      {"max_k", monitor.config().max_k()},
                      {"gamma", number_json(monitor.config().gamma)},
                      {"alpha", number_json(monitor.config().alpha)},
                      {"threshold", number_json(monitor.config().threshold)},
                      {"beta_hat", vector_to_json(monitor.beta_hat().values())},
                      {"A", matrix_to_json(monitor.config().A)},
                      {"k", monitor.k()},
                      {"running_sum", vector_to_json(monitor.running_sum())},
                      {"alarm", result.alarm_at.has_value()},
                      {"alarm_at", result.alarm_at ? nlohmann::json(*result.alarm_at) : nlohmann::json()},
                      {"truncated", result.truncated}};
  const auto& h = result.history;
  j["max_statistic"] = h.empty() ? nlohmann::json() : number_json(*std::max_element(h.begin(), h.end()));
  return j;
}

void write_consistency_csv(std::ostream& out, const ConsistencyReport& report) {
  const Eigen::Index p = report.rows.empty() ? 0 : report.rows.front().mse.size();
  out << "m,mse_phi0,mse_phi1";
  for (Eigen::Index j = 2; j < p; ++j) out << ",mse_gamma" << (j - 1);
  out << ",fits,failures,flagged\n";
  for (const auto& row : report.rows) {
    out << row.m;
    for (Eigen::Index j = 0; j < p; ++j) out << ',' << format_double(row.mse[j]);
    out << ',' << row.fits << ',' << row.failures << ',' << (row.flagged ? 1 : 0) << '\n';
  }
}

void write_normality_csv(std::ostream& out, const NormalityReport& r) {
  out << "coordinate,mean,mc_se,skewness,skewness_z,excess_kurtosis,kurtosis_z,qq_correlation\n";
  for (Eigen::Index j = 0; j < r.mean.size(); ++j) {
    out << j << ',' << format_double(r.mean[j]) << ',' << format_double(r.mc_se[j]) << ','
        << format_double(r.skewness[j]) << ',' << format_double(r.skewness_z[j]) << ','
        << format_double(r.excess_kurtosis[j]) << ',' << format_double(r.kurtosis_z[j]) << ','
        << format_double(r.qq_correlation[j]) << '\n';
  }
}

void write_estimates_csv(std::ostream& out, const NormalityReport& r) {
  out << "rep";
  for (Eigen::Index j = 0; j < r.estimates.cols(); ++j) out << ",beta" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < r.estimates.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < r.estimates.cols(); ++j) out << ',' << format_double(r.estimates(i, j));
    out << '\n';
  }
}

void write_size_csv(std::ostream& out, const SizeReport& report) {
  out << "gamma,m,alpha,c,rejection_rate,reps_used,failures,flagged\n";
  for (const auto& c : report.cells) {
    out << format_double(c.gamma) << ',' << c.m << ',' << format_double(c.alpha) << ','
        << format_double(c.c) << ',' << format_double(c.rejection_rate) << ',' << c.reps_used
        << ',' << c.failures << ',' << (c.flagged ? 1 : 0) << '\n';
  }
}

void write_power_csv(std::ostream& out, const PowerReport& report) {
  const Eigen::Index p = report.cells.empty() ? 0 : report.cells.front().score_drift.size();
  out << "gamma,m,alpha,c,detection_rate,mean_detection,median_detection";
  for (Eigen::Index j = 0; j < p; ++j) out << ",score_drift" << j;
  out << ",reps_used,failures,flagged\n";
  for (const auto& c : report.cells) {
    out << format_double(c.gamma) << ',' << c.m << ',' << format_double(c.alpha) << ','
        << format_double(c.c) << ',' << format_double(c.detection_rate) << ','
        << format_double(c.mean_detection) << ',' << format_double(c.median_detection);
    for (Eigen::Index j = 0; j < p; ++j) out << ',' << format_double(c.score_drift[j]);
    out << ',' << c.reps_used << ',' << c.failures << ',' << (c.flagged ? 1 : 0) << '\n';
  }
}

void write_traces_csv(std::ostream& out, const PowerReport& report) {
  out << "m,gamma,rep,k,statistic\n";
  for (const auto& trace : report.traces) {
    for (std::size_t k = 0; k < trace.statistics.size(); ++k) {
      out << trace.m << ',' << format_double(trace.gamma) << ',' << trace.rep << ',' << (k + 1)
          << ',' << format_double(trace.statistics[k]) << '\n';
    }
  }
}

}  // namespace binar
