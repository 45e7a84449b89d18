#include "binar/dataprep.hpp"

#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "binar/error.hpp"

namespace binar {
namespace {

std::string describe_missing(const MissingBaselineError::Missing& missing) {
  std::string text = "no baseline for";
  for (std::size_t i = 0; i < missing.size() && i < 10; ++i) {
    text += " (" + missing[i].first + ", week " + std::to_string(missing[i].second) + ")";
  }
  if (missing.size() > 10) text += " and " + std::to_string(missing.size() - 10) + " more";
  return text;
}

std::string describe_gaps(const std::vector<CoverageError::Gap>& gaps) {
  std::string text = "panel has no rate for";
  for (std::size_t i = 0; i < gaps.size() && i < 10; ++i) {
    text += " (" + gaps[i].state + ", " + std::to_string(gaps[i].iso_year) + "-W" +
            std::to_string(gaps[i].week) + ")";
  }
  if (gaps.size() > 10) text += " and " + std::to_string(gaps.size() - 10) + " more";
  return text;
}

double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

MissingBaselineError::MissingBaselineError(Missing missing)
    : Error(describe_missing(missing)), missing_(std::move(missing)) {}

CoverageError::CoverageError(std::vector<Gap> gaps)
    : Error(describe_gaps(gaps)), gaps_(std::move(gaps)) {}

RatePanel::RatePanel(std::vector<RateRow> rows) : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const RateRow& r = rows_[i];
    if (r.week < 1 || r.week > 53) {
      throw DomainError("week " + std::to_string(r.week) + " outside 1..53");
    }
    if (!std::isfinite(r.rate) || r.rate < 0.0) {
      throw DomainError("rate for " + r.state + " must be finite and >= 0");
    }
    if (!index_.emplace(std::tuple{r.state, r.iso_year, r.week}, i).second) {
      throw DomainError("duplicate row (" + r.state + ", " + std::to_string(r.iso_year) +
                        ", " + std::to_string(r.week) + ")");
    }
  }
}

const RateRow* RatePanel::find(const std::string& state, int iso_year, int week) const {
  const auto it = index_.find(std::tuple{state, iso_year, week});
  return it == index_.end() ? nullptr : &rows_[it->second];
}

BaselineTable::BaselineTable(std::map<std::pair<std::string, int>, double> means,
                             Week53Policy policy)
    : means_(std::move(means)), policy_(policy) {}

const double* BaselineTable::lookup(const std::string& state, int week) const {
  if (week > 52 && policy_ == Week53Policy::map_to_52) week = 52;
  const auto it = means_.find({state, week});
  return it == means_.end() ? nullptr : &it->second;
}

bool BaselineTable::contains(const std::string& state, int week) const {
  return lookup(state, week) != nullptr;
}

double BaselineTable::at(const std::string& state, int week) const {
  if (const double* v = lookup(state, week)) return *v;
  throw MissingBaselineError({{state, week}});
}

int iso_weeks_in_year(int iso_year) {
  auto p = [](int y) {
    const int r = (y + y / 4 - y / 100 + y / 400) % 7;
    return r < 0 ? r + 7 : r;
  };
  return (p(iso_year) == 4 || p(iso_year - 1) == 3) ? 53 : 52;
}

IsoWeek next_iso_week(IsoWeek w) {
  if (w.week < iso_weeks_in_year(w.iso_year)) return {w.iso_year, w.week + 1};
  return {w.iso_year + 1, 1};
}

std::vector<IsoWeek> EvaluationWindow::weeks() const {
  if (first.week < 1 || first.week > iso_weeks_in_year(first.iso_year) || last.week < 1 ||
      last.week > iso_weeks_in_year(last.iso_year)) {
    throw DomainError("evaluation window endpoints are not valid ISO weeks");
  }
  if (last < first) throw DomainError("evaluation window ends before it starts");
  std::vector<IsoWeek> out;
  for (IsoWeek w = first; w <= last; w = next_iso_week(w)) out.push_back(w);
  return out;
}

BaselineTable compute_baseline(const RatePanel& panel, const std::set<int>& baseline_years,
                               Week53Policy policy) {
  std::map<std::pair<std::string, int>, std::pair<double, int>> sums;
  for (const RateRow& r : panel.rows()) {
    if (!baseline_years.contains(r.iso_year)) continue;
    auto& [sum, count] = sums[{r.state, r.week}];
    sum += r.rate;
    ++count;
  }
  std::map<std::pair<std::string, int>, double> means;
  for (const auto& [key, acc] : sums) means[key] = acc.first / acc.second;
  return BaselineTable(std::move(means), policy);
}

BaselineTable compute_baseline(const RatePanel& panel, const std::set<int>& baseline_years,
                               const std::vector<std::string>& states,
                               const EvaluationWindow& window, Week53Policy policy) {
  BaselineTable table = compute_baseline(panel, baseline_years, policy);
  std::set<int> weeks_needed;
  for (const IsoWeek& w : window.weeks()) weeks_needed.insert(w.week);
  MissingBaselineError::Missing missing;
  for (const std::string& state : states) {
    for (int week : weeks_needed) {
      if (!table.contains(state, week)) missing.emplace_back(state, week);
    }
  }
  if (!missing.empty()) throw MissingBaselineError(std::move(missing));
  return table;
}

BinomialSeries binarize_and_sum(const RatePanel& panel, const BaselineTable& baseline,
                                const std::vector<std::string>& states,
                                const EvaluationWindow& window) {
  if (states.empty()) throw DomainError("at least one state is required");
  BinomialSeries series;
  series.n = static_cast<int>(states.size());
  std::vector<CoverageError::Gap> gaps;
  MissingBaselineError::Missing missing;
  for (const IsoWeek& w : window.weeks()) {
    int count = 0;
    for (const std::string& state : states) {
      const RateRow* row = panel.find(state, w.iso_year, w.week);
      if (!row) {
        gaps.push_back({state, w.iso_year, w.week});
        continue;
      }
      if (!baseline.contains(state, w.week)) {
        missing.emplace_back(state, w.week);
        continue;
      }
      if (row->rate > baseline.at(state, w.week)) ++count;
    }
    series.x.push_back(count);
    series.labels.push_back(w);
  }
  if (!gaps.empty()) throw CoverageError(std::move(gaps));
  if (!missing.empty()) throw MissingBaselineError(std::move(missing));
  return series;
}

IidBinomialFit fit_iid_binomial(const std::vector<int>& x, int n) {
  if (x.empty()) throw DomainError("series must be non-empty");
  if (n < 1) throw DomainError("binomial total n must be >= 1");
  long total = 0;
  for (int v : x) {
    if (v < 0 || v > n) throw DomainError("count outside [0, n]");
    total += v;
  }
  IidBinomialFit fit;
  fit.pi_hat = static_cast<double>(total) / (static_cast<double>(n) * x.size());
  fit.boundary = fit.pi_hat == 0.0 || fit.pi_hat == 1.0;
  for (int v : x) {
    fit.log_lik += log_choose(n, v);
    if (v > 0) fit.log_lik += v * std::log(fit.pi_hat);
    if (v < n) fit.log_lik += (n - v) * std::log1p(-fit.pi_hat);
  }
  fit.aic = 2.0 - 2.0 * fit.log_lik;
  return fit;
}

IidBinomialFit fit_iid_binomial(const BinomialSeries& series) {
  return fit_iid_binomial(series.x, series.n);
}

SeriesSample to_series_sample(const BinomialSeries& series) {
  SeriesSample sample;
  sample.x = series.x;
  sample.w.resize(static_cast<Eigen::Index>(series.x.size()) - 1, 0);
  return sample;
}

ModelComparison model_comparison(const BinomialSeries& series, const SolverConfig& solver) {
  if (series.x.size() < 2) throw DomainError("comparison needs at least two observations");
  ModelComparison out;
  out.ar1 = fit_mple(to_series_sample(series), series.n, solver);
  out.simple = fit_iid_binomial(std::vector<int>(series.x.begin() + 1, series.x.end()), series.n);
  out.aic_simple = out.simple.aic;
  out.aic_ar1 = out.ar1.aic;
  out.lr_stat = 2.0 * (out.ar1.log_pl - out.simple.log_lik);
  out.df = 1;
  out.p_value = chi_square_sf(std::max(out.lr_stat, 0.0), out.df);
  return out;
}

double chi_square_sf(double x, double df) {
  if (!(df > 0.0)) throw DomainError("chi-square df must be positive");
  if (std::isnan(x)) throw DomainError("chi-square argument is NaN");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

}  // namespace binar
