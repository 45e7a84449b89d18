#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "binar/rng.hpp"

namespace binar {

inline constexpr double kDefaultBoxBound = 20.0;
inline constexpr int kDefaultBurnIn = 500;

/// Coefficients (phi0, phi1, gamma_1..gamma_l) of the logistic link
/// eta = phi0 + phi1 * X_{t-1} + gamma . W_t.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(Eigen::VectorXd values);
  ParamVector(double phi0, double phi1, const std::vector<double>& gamma = {});

  double phi0() const { return values_[0]; }
  double phi1() const { return values_[1]; }
  double gamma(Eigen::Index i) const { return values_[2 + i]; }
  Eigen::Index exo_dim() const { return values_.size() - 2; }
  Eigen::Index size() const { return values_.size(); }
  const Eigen::VectorXd& values() const { return values_; }

  bool within_box(double bound) const {
    return values_.cwiseAbs().maxCoeff() <= bound;
  }

 private:
  Eigen::VectorXd values_ = Eigen::VectorXd::Zero(2);
};

/// Distribution of one exogenous coordinate: a normal draw clamped to
/// [clamp_lo, clamp_hi]. Coordinates are i.i.d. across dimensions and time.
struct ExogenousSpec {
  std::string dist = "normal";
  double mean = 0.0;
  double sd = 1.0;
  double clamp_lo = -1.0;
  double clamp_hi = 1.0;
  int dim = 0;

  void validate() const;
  double clamp(double w) const;
};

struct ModelSpec {
  int n = 1;
  ParamVector beta;
  ExogenousSpec exo;
  int burn_in = kDefaultBurnIn;
  double box_bound = kDefaultBoxBound;

  void validate() const;
};

/// n = 10, beta = (-1, 0.1, 0.4), W ~ N(1, 0.1^2) clamped to [0, 10].
ModelSpec benchmark_spec();

/// Observed path X_0..X_T with the exogenous draws that drove it.
/// Row t-1 of `w` holds W_t, the covariate entering the law of X_t.
struct SeriesSample {
  std::vector<int> x;
  Eigen::MatrixXd w;
  std::uint64_t seed = 0;

  int length() const { return static_cast<int>(x.size()) - 1; }
  Eigen::Index exo_dim() const { return w.cols(); }
  /// Regressor Z_{t-1} = (1, X_{t-1}, W_t) for 1 <= t <= length().
  Eigen::VectorXd regressor(int t) const;
  void validate(int n) const;
};

double link_eval(double mu, int n);
double inverse_link(double eta, int n);

/// 1 / (1 + exp(-eta)), evaluated without overflow.
double logistic(double eta);
/// log(logistic(eta)), accurate in both tails.
double log_logistic(double eta);

double success_prob(const ParamVector& beta, const Eigen::VectorXd& z);

Eigen::VectorXd build_regressor(int x_prev, const Eigen::VectorXd& w);

/// Smallest success probability attainable inside the parameter box, given
/// X in {0..n} and W in the clamp interval. success_prob stays within
/// [eps, 1 - eps] for every admissible input.
double success_prob_floor(const ModelSpec& spec);

/// Switch of the generating coefficients: X_t for t >= at_t is drawn with
/// `beta`.
struct RegimeChange {
  int at_t = 1;
  ParamVector beta;
};

Eigen::VectorXd draw_exogenous(const ExogenousSpec& exo, Engine& engine);
int draw_next(int n, const ParamVector& beta, const Eigen::VectorXd& z,
              Engine& engine);

/// Simulates X_0..X_T. Without `init`, X_0 is the end point of a burn-in
/// chain started from Bin(n, 1/2). Per step the draw order is W_t
/// (coordinates 1..l) then X_t.
SeriesSample simulate_series(const ModelSpec& spec, int length,
                             std::uint64_t seed,
                             std::optional<int> init = std::nullopt,
                             const std::optional<RegimeChange>& change =
                                 std::nullopt);

struct StationaryResult {
  Eigen::MatrixXd transition;  // (n+1) x (n+1), row = from-state
  Eigen::VectorXd pmf;
  int iterations = 0;
};

inline constexpr int kOracleMaxStates = 31;

/// Transition matrix of the chain (integrating W by quadrature) and its
/// stationary law by power iteration. Requires n <= 30 and l <= 2.
StationaryResult stationary_oracle(const ModelSpec& spec,
                                   int w_quadrature = 64);

/// Gauss-Legendre nodes and weights on [lo, hi].
void gauss_legendre(int count, double lo, double hi, Eigen::VectorXd& nodes,
                    Eigen::VectorXd& weights);

}  // namespace binar
