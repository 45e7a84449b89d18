#pragma once

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "binar/estimation.hpp"

namespace binar {

struct RateRow {
  std::string state;
  int iso_year = 0;
  int week = 0;  // 1..53
  double rate = 0.0;
};

/// Weekly per-state rates. Construction validates: no duplicate
/// (state, year, week), weeks in 1..53, rates finite and non-negative.
class RatePanel {
 public:
  RatePanel() = default;
  explicit RatePanel(std::vector<RateRow> rows);

  const std::vector<RateRow>& rows() const { return rows_; }
  const RateRow* find(const std::string& state, int iso_year, int week) const;

 private:
  std::vector<RateRow> rows_;
  std::map<std::tuple<std::string, int, int>, std::size_t> index_;
};

/// How a week-53 lookup is resolved when the baseline has no week 53.
enum class Week53Policy {
  map_to_52,  // use the week-52 mean
  strict,     // missing week 53 is an error
};

/// Mean rate per (state, week-of-year) over the baseline years.
class BaselineTable {
 public:
  BaselineTable() = default;
  BaselineTable(std::map<std::pair<std::string, int>, double> means,
                Week53Policy policy);

  /// Throws MissingBaselineError if the pair cannot be resolved.
  double at(const std::string& state, int week) const;
  bool contains(const std::string& state, int week) const;
  const std::map<std::pair<std::string, int>, double>& means() const { return means_; }
  Week53Policy policy() const { return policy_; }

 private:
  const double* lookup(const std::string& state, int week) const;

  std::map<std::pair<std::string, int>, double> means_;
  Week53Policy policy_ = Week53Policy::map_to_52;
};

struct IsoWeek {
  int iso_year = 0;
  int week = 0;
  auto operator<=>(const IsoWeek&) const = default;
};

/// Number of ISO weeks (52 or 53) in an ISO year.
int iso_weeks_in_year(int iso_year);
IsoWeek next_iso_week(IsoWeek w);

struct EvaluationWindow {
  IsoWeek first;
  IsoWeek last;  // inclusive
  std::vector<IsoWeek> weeks() const;
};

BaselineTable compute_baseline(const RatePanel& panel,
                               const std::set<int>& baseline_years,
                               Week53Policy policy = Week53Policy::map_to_52);

/// Same, and additionally verifies that every (state, week) needed by the
/// window resolves; throws MissingBaselineError listing the absent pairs.
BaselineTable compute_baseline(const RatePanel& panel,
                               const std::set<int>& baseline_years,
                               const std::vector<std::string>& states,
                               const EvaluationWindow& window,
                               Week53Policy policy = Week53Policy::map_to_52);

struct BinomialSeries {
  std::vector<int> x;
  int n = 0;
  std::vector<IsoWeek> labels;
};

/// x_t = number of states whose rate strictly exceeds its baseline.
BinomialSeries binarize_and_sum(const RatePanel& panel,
                                const BaselineTable& baseline,
                                const std::vector<std::string>& states,
                                const EvaluationWindow& window);

struct IidBinomialFit {
  double pi_hat = 0.0;
  double log_lik = 0.0;
  double aic = 0.0;
  bool boundary = false;  // pi_hat is 0 or 1
};

/// Constant-pi binomial fit over every value in `x`.
IidBinomialFit fit_iid_binomial(const std::vector<int>& x, int n);
IidBinomialFit fit_iid_binomial(const BinomialSeries& series);

struct ModelComparison {
  IidBinomialFit simple;  // evaluated on t = 1..T
  FitResult ar1;          // Z_{t-1} = (1, X_{t-1})
  double aic_simple = 0.0;
  double aic_ar1 = 0.0;
  double lr_stat = 0.0;
  double p_value = 0.0;
  int df = 1;
};

/// AR(1) versus i.i.d. binomial on the common range t = 1..T.
ModelComparison model_comparison(const BinomialSeries& series,
                                 const SolverConfig& solver = {});

/// Survival function of the chi-square distribution, Q(df/2, x/2).
double chi_square_sf(double x, double df);

/// Series as a SeriesSample with no exogenous covariates.
SeriesSample to_series_sample(const BinomialSeries& series);

}  // namespace binar
