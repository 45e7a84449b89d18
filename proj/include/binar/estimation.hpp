#pragma once

#include <Eigen/Dense>

#include "binar/model.hpp"

namespace binar {

using ScoreVector = Eigen::VectorXd;
using InfoMatrix = Eigen::MatrixXd;

struct SolverConfig {
  double score_tol = 1e-8;
  double step_tol = 1e-10;
  int max_iter = 100;
  int max_halvings = 30;
  double box_bound = kDefaultBoxBound;
  double max_condition = 1e12;
};

/// Maximum partial likelihood fit over t = 1..m (X_0 only conditions).
struct FitResult {
  ParamVector beta_hat;
  Eigen::MatrixXd covariance;  // (-sum grad G / m)^{-1}
  Eigen::MatrixXd sigma0_hat;  // sum G G^T / m at beta_hat
  double log_pl = 0.0;
  double aic = 0.0;
  int m = 0;
  int iterations = 0;
  bool converged = false;
  bool hit_boundary = false;
  double final_score_norm = 0.0;

  /// covariance / m: the finite-sample covariance of beta_hat.
  Eigen::MatrixXd estimator_covariance() const { return covariance / m; }
  /// sqrt(diag(covariance) / m): standard errors of beta_hat.
  Eigen::VectorXd standard_errors() const;
};

/// Sum over t = 1..m of log C(n, X_t) + X_t log pi_t + (n - X_t) log(1 - pi_t).
double log_partial_likelihood(const SeriesSample& series, int n,
                              const ParamVector& beta);

/// G(X_t, beta) = Z_{t-1} (X_t - n pi_t).
ScoreVector score_term(const SeriesSample& series, int n,
                       const ParamVector& beta, int t);

/// sum_{t=first}^{last} G(X_t, beta), accumulated in increasing t.
ScoreVector score_sum(const SeriesSample& series, int n,
                      const ParamVector& beta, int first, int last);

/// Partial score vector PSV_m(beta) over the whole series.
ScoreVector score(const SeriesSample& series, int n, const ParamVector& beta);

/// sum_t grad G(X_t, beta) = -n sum_t pi_t (1 - pi_t) Z Z^T.
InfoMatrix score_gradient(const SeriesSample& series, int n,
                          const ParamVector& beta);

/// Newton iteration with step-halving from beta = 0.
///
/// Throws SeparationError when every X_t (t >= 1) equals 0 or every X_t
/// equals n, SingularHessianError when the information matrix has a
/// condition number above `max_condition`, and NonConvergenceError when
/// `max_iter` is exhausted.
FitResult fit_mple(const SeriesSample& series, int n,
                   const SolverConfig& config = {});

/// (-score_gradient / m)^{-1} at beta.
Eigen::MatrixXd estimate_covariance(const SeriesSample& series, int n,
                                    const ParamVector& beta);
Eigen::MatrixXd estimate_covariance(const FitResult& fit);

/// sum_t G G^T / m at beta.
Eigen::MatrixXd estimate_sigma0(const SeriesSample& series, int n,
                                const ParamVector& beta);

/// Inverse of a symmetric positive definite matrix; throws
/// SingularHessianError when it is not numerically PD.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& matrix,
                            double max_condition = 1e12);

}  // namespace binar
