#include "binar/estimation.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "binar/error.hpp"

namespace binar {
namespace {

void check_inputs(const SeriesSample& series, int n, const ParamVector& beta) {
  if (series.length() < 1) {
    throw DomainError("series too short: need at least one transition");
  }
  if (beta.size() != 2 + series.exo_dim()) {
    throw DimensionError("beta has " + std::to_string(beta.size()) +
                         " entries; series implies " +
                         std::to_string(2 + series.exo_dim()));
  }
  if (n < 1) {
    throw DomainError("binomial total n must be >= 1");
  }
}

double log_choose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double sup_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// Condition number of a symmetric matrix; infinite when not positive definite.
double spd_condition(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace

Eigen::VectorXd FitResult::standard_errors() const {
  return (covariance.diagonal() / m).cwiseSqrt();
}

double log_partial_likelihood(const SeriesSample& series, int n,
                              const ParamVector& beta) {
  check_inputs(series, n, beta);
  double total = 0.0;
  for (int t = 1; t <= series.length(); ++t) {
    const int x = series.x[static_cast<std::size_t>(t)];
    const double eta = beta.values().dot(series.regressor(t));
    total += log_choose(n, x) + x * log_logistic(eta) +
             (n - x) * log_logistic(-eta);
  }
  return total;
}

ScoreVector score_term(const SeriesSample& series, int n,
                       const ParamVector& beta, int t) {
  const Eigen::VectorXd z = series.regressor(t);
  const double resid =
      series.x[static_cast<std::size_t>(t)] - n * logistic(beta.values().dot(z));
  return z * resid;
}

ScoreVector score_sum(const SeriesSample& series, int n,
                      const ParamVector& beta, int first, int last) {
  check_inputs(series, n, beta);
  if (first < 1 || last > series.length()) {
    throw DomainError("score_sum range outside 1..length");
  }
  ScoreVector total = ScoreVector::Zero(beta.size());
  for (int t = first; t <= last; ++t) {
    total += score_term(series, n, beta, t);
  }
  return total;
}

ScoreVector score(const SeriesSample& series, int n, const ParamVector& beta) {
  return score_sum(series, n, beta, 1, series.length());
}

InfoMatrix score_gradient(const SeriesSample& series, int n,
                          const ParamVector& beta) {
  check_inputs(series, n, beta);
  const Eigen::Index p = beta.size();
  InfoMatrix total = InfoMatrix::Zero(p, p);
  for (int t = 1; t <= series.length(); ++t) {
    const Eigen::VectorXd z = series.regressor(t);
    const double pi = logistic(beta.values().dot(z));
    total.noalias() -= (n * pi * (1.0 - pi)) * (z * z.transpose());
  }
  // Each term is symmetric; mirror the lower triangle so the sum is too.
  return total.selfadjointView<Eigen::Lower>();
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& matrix,
                            double max_condition) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(matrix);
  if (eig.info() != Eigen::Success) {
    throw SingularHessianError("eigendecomposition failed");
  }
  const Eigen::VectorXd& values = eig.eigenvalues();
  if (!(values.minCoeff() > 0.0) ||
      values.maxCoeff() / values.minCoeff() > max_condition) {
    throw SingularHessianError("matrix is singular or not positive definite");
  }
  const Eigen::MatrixXd& vectors = eig.eigenvectors();
  Eigen::MatrixXd inv = vectors * values.cwiseInverse().asDiagonal() *
                        vectors.transpose();
  return 0.5 * (inv + inv.transpose());
}

Eigen::MatrixXd estimate_covariance(const SeriesSample& series, int n,
                                    const ParamVector& beta) {
  const Eigen::MatrixXd info = -score_gradient(series, n, beta) / series.length();
  return spd_inverse(info);
}

Eigen::MatrixXd estimate_covariance(const FitResult& fit) {
  if (!fit.converged) {
    throw NonConvergenceError("covariance requested for an unconverged fit");
  }
  return fit.covariance;
}

Eigen::MatrixXd estimate_sigma0(const SeriesSample& series, int n,
                                const ParamVector& beta) {
  check_inputs(series, n, beta);
  const Eigen::Index p = beta.size();
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(p, p);
  for (int t = 1; t <= series.length(); ++t) {
    const ScoreVector g = score_term(series, n, beta, t);
    total.noalias() += g * g.transpose();
  }
  return total / series.length();
}

FitResult fit_mple(const SeriesSample& series, int n,
                   const SolverConfig& config) {
  series.validate(n);
  const int m = series.length();
  const Eigen::Index p = 2 + series.exo_dim();
  if (m < p + 1) {
    throw DomainError("need m >= l + 3 observations to fit, got m = " +
                      std::to_string(m));
  }
  bool all_zero = true;
  bool all_full = true;
  for (int t = 1; t <= m; ++t) {
    all_zero = all_zero && series.x[static_cast<std::size_t>(t)] == 0;
    all_full = all_full && series.x[static_cast<std::size_t>(t)] == n;
  }
  if (all_zero || all_full) {
    throw SeparationError("every observation is " +
                          std::string(all_zero ? "0" : "n") +
                          "; the partial likelihood has no maximizer");
  }

  FitResult fit;
  fit.m = m;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = log_partial_likelihood(series, n, ParamVector(beta));
  ScoreVector g = score(series, n, ParamVector(beta));
  bool stalled = false;

  int iter = 0;
  while (sup_norm(g) >= config.score_tol && !stalled) {
    if (iter == config.max_iter) {
      throw NonConvergenceError("Newton iteration did not converge in " +
                                std::to_string(config.max_iter) +
                                " iterations (|score| = " +
                                std::to_string(sup_norm(g)) + ")");
    }
    ++iter;
    const Eigen::MatrixXd info = -score_gradient(series, n, ParamVector(beta));
    if (spd_condition(info) > config.max_condition) {
      throw SingularHessianError("information matrix is numerically singular");
    }
    Eigen::VectorXd direction;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() == Eigen::Success) {
      direction = llt.solve(g);
    } else {
      direction = info.ldlt().solve(g);
    }

    const double roundoff = 1e-12 * (std::abs(ll) + m);
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    double candidate_ll = 0.0;
    for (int h = 0; h <= config.max_halvings; ++h, step *= 0.5) {
      candidate = beta + step * direction;
      const Eigen::VectorXd projected =
          candidate.cwiseMax(-config.box_bound).cwiseMin(config.box_bound);
      const bool clipped = (projected.array() != candidate.array()).any();
      candidate = projected;
      candidate_ll = log_partial_likelihood(series, n, ParamVector(candidate));
      // Near the optimum the gain falls below the rounding error of the
      // summed likelihood; accept such steps when they shrink the score.
      const bool flat = candidate_ll >= ll - roundoff &&
                        sup_norm(score(series, n, ParamVector(candidate))) < sup_norm(g);
      if (candidate_ll >= ll || flat) {
        accepted = true;
        fit.hit_boundary = fit.hit_boundary || clipped;
        break;
      }
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    const double step_norm = (candidate - beta).norm();
    beta = candidate;
    ll = candidate_ll;
    g = score(series, n, ParamVector(beta));
    if (step_norm < config.step_tol) {
      stalled = true;
    }
  }

  fit.iterations = iter;
  fit.beta_hat = ParamVector(beta);
  fit.log_pl = ll;
  fit.aic = 2.0 * static_cast<double>(p) - 2.0 * ll;
  fit.final_score_norm = sup_norm(g);
  fit.converged = fit.final_score_norm < config.score_tol;
  fit.hit_boundary =
      fit.hit_boundary || beta.cwiseAbs().maxCoeff() >= config.box_bound;
  fit.covariance = estimate_covariance(series, n, fit.beta_hat);
  fit.sigma0_hat = estimate_sigma0(series, n, fit.beta_hat);
  return fit;
}

}  // namespace binar
