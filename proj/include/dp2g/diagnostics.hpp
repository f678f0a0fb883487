#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dp2g/disagreement.hpp"
#include "dp2g/objectives.hpp"

namespace dp2g {

// Per-round convergence metrics, all measured against the centralized
// reference solution.
struct MetricsSample {
  long round = 0;
  double objective_residual = 0;   // |f(x_avg) - f(x*)|
  double consensus_violation = 0;  // (1/n) sum_i |x_i - x_avg|
  double optimality_residual = 0;  // |sum_i grad f_i(x_avg)| (composite for elastic net)
  double penalty = 0;              // rho |Zx|_1
  double rho = 0;
  double stationarity_bound = 0;   // |grad F(x) + Z'y| stacked
};

struct OracleResult {
  Eigen::VectorXd x_star;
  double f_star = 0;
};

// Centralized reference: closed-form normal equations for ridge, accelerated
// proximal gradient with backtracking for logistic / elastic net, driven to
// stationarity residual <= tol. Throws on non-convergence.
OracleResult centralized_oracle(const Problem& p, double tol = 1e-10, long max_iters = 500000);

// Composite stationarity certificate |grad F(x) + Z'y| (per-agent l1
// subdifferentials resolved for elastic net).
double stationarity_bound(const Stacked& x, const Stacked& y, const Problem& p,
                          const MixingMatrix& w);

struct LyapunovConstants {
  double delta = 0, a = 0, b = 0, c = 0;
};

// Explicit constants with tuning delta in (0, 1/5]; valid (a, b, c > 0) for
// alpha < 1/(3 L_max). Throws when c fails to be positive.
LyapunovConstants lyapunov_constants(double alpha, double l_max, double delta);

// Psi_rho(x, y, p, q) = F(x) + <Zx, y> - a |x-p|^2 + b |x-q|^2, with the
// dual box constraint enforced: infeasible y returns -inf.
double lyapunov_value(const Stacked& x, const Stacked& y, const Stacked& p_arg,
                      const Stacked& q_arg, double rho, const Problem& problem,
                      const MixingMatrix& w, const LyapunovConstants& c);

struct InnerTracePoint {
  Stacked x, y;
};

// Per-step descent margins along an inner-iteration trace:
//   margin_t = Psi(z^t) - Psi(z^{t+1}) - c (|x^{t+1}-x^t|^2 + |x^t-x^{t-1}|^2)
// with z^t = (x^t, y^t, x^{t+1}, x^{t-1}); defined for t = 1..T-2.
std::vector<double> lyapunov_descent_margins(const std::vector<InnerTracePoint>& trace, double rho,
                                             const Problem& p, const MixingMatrix& w,
                                             const LyapunovConstants& c);

struct RateFit {
  double slope = 0;
  double r_squared = 0;
  int points = 0;
};

// Least-squares fit of log(distance) against the iteration index. Distances
// at or below the numerical floor are dropped; requires >= 20 usable points.
RateFit linear_rate_fit(const std::vector<double>& distances, double floor = 1e-12);

MetricsSample compute_metrics(const Stacked& x, const Stacked& y, const Problem& p,
                              const MixingMatrix& w, const OracleResult& oracle, long round,
                              double rho);

}  // namespace dp2g
