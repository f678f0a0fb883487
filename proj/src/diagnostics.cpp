#include "dp2g/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dp2g {

namespace {

Eigen::VectorXd global_smooth_gradient(const Problem& p, const Eigen::VectorXd& x) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p.dim);
  for (int i = 0; i < p.agents(); ++i) g += smooth_gradient(p, i, x);
  return g;
}

double global_smooth_value(const Problem& p, const Eigen::VectorXd& x) {
  // Smooth part only (elastic-net l1 handled by the prox in the oracle loop).
  double v = objective_value(p, x);
  if (p.kind == ProblemKind::ElasticNet) v -= p.agents() * p.lambda1 * x.lpNorm<1>();
  return v;
}

Eigen::VectorXd shrink(const Eigen::VectorXd& v, double thr) {
  Eigen::VectorXd out(v.size());
  for (int j = 0; j < v.size(); ++j) {
    double a = std::abs(v(j)) - thr;
    out(j) = a > 0 ? (v(j) > 0 ? a : -a) : 0.0;
  }
  return out;
}

OracleResult ridge_closed_form(const Problem& p) {
  const int m = p.dim;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (const auto& s : p.shards) {
    double d = static_cast<double>(s.features.rows());
    h.noalias() += (s.features.transpose() * s.features) / d;
    rhs.noalias() += (s.features.transpose() * s.responses) / d;
  }
  h += p.agents() * p.lambda * Eigen::MatrixXd::Identity(m, m);
  OracleResult out;
  out.x_star = h.ldlt().solve(rhs);
  out.f_star = objective_value(p, out.x_star);
  return out;
}

// FISTA with backtracking and function restart; residual measured through
// the prox-gradient mapping so it covers the composite case.
OracleResult first_order_oracle(const Problem& p, double tol, long max_iters) {
  const double l1 = p.kind == ProblemKind::ElasticNet ? p.agents() * p.lambda1 : 0.0;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.dim);
  Eigen::VectorXd z = x;
  double theta = 1.0;
  double step = 1.0 / std::max(1e-12, p.l_max * p.agents());
  double fz = global_smooth_value(p, z);

  for (long it = 0; it < max_iters; ++it) {
    Eigen::VectorXd g = global_smooth_gradient(p, z);
    // Backtracking on the smooth majorization at z.
    Eigen::VectorXd x_next;
    for (int bt = 0; bt < 60; ++bt) {
      Eigen::VectorXd cand = z - step * g;
      if (l1 > 0) cand = shrink(cand, step * l1);
      double lhs = global_smooth_value(p, cand);
      Eigen::VectorXd diff = cand - z;
      double rhs = fz + g.dot(diff) + diff.squaredNorm() / (2.0 * step);
      if (lhs <= rhs + 1e-15 * std::abs(rhs)) {
        x_next = std::move(cand);
        break;
      }
      step *= 0.5;
    }
    if (x_next.size() == 0) throw std::runtime_error("centralized_oracle: backtracking failed");

    // Stationarity at x_next via the minimal-norm composite subgradient.
    Eigen::VectorXd gx = global_smooth_gradient(p, x_next);
    double res = composite_gradient_norm(x_next, gx, l1);
    if (res <= tol) {
      OracleResult out;
      out.x_star = std::move(x_next);
      out.f_star = objective_value(p, out.x_star);
      return out;
    }

    double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    Eigen::VectorXd z_next = x_next + ((theta - 1.0) / theta_next) * (x_next - x);
    // Restart the momentum when it stops helping.
    if (global_smooth_value(p, z_next) + l1 * z_next.lpNorm<1>() >
        global_smooth_value(p, x_next) + l1 * x_next.lpNorm<1>()) {
      z_next = x_next;
      theta_next = 1.0;
    }
    x = std::move(x_next);
    z = std::move(z_next);
    theta = theta_next;
    fz = global_smooth_value(p, z);
    step *= 1.1;  // allow recovery after backtracks
  }
  throw std::runtime_error("centralized_oracle: no convergence within iteration budget");
}

}  // namespace

OracleResult centralized_oracle(const Problem& p, double tol, long max_iters) {
  if (p.kind == ProblemKind::Ridge) return ridge_closed_form(p);
  return first_order_oracle(p, tol, max_iters);
}

double stationarity_bound(const Stacked& x, const Stacked& y, const Problem& p,
                          const MixingMatrix& w) {
  double acc = 0.0;
  for (int i = 0; i < x.agents(); ++i) {
    Eigen::VectorXd gi = smooth_gradient(p, i, x.block(i)) + adjoint_residual(y, w, i);
    double r = composite_residual_norm(p, x.block(i), gi);
    acc += r * r;
  }
  return std::sqrt(acc);
}

LyapunovConstants lyapunov_constants(double alpha, double l_max, double delta) {
  if (!(delta > 0.0) || delta > 0.2 + 1e-15)
    throw std::invalid_argument("lyapunov_constants: delta must lie in (0, 1/5]");
  if (!(alpha > 0.0) || !(alpha < 1.0 / (3.0 * l_max)))
    throw std::invalid_argument("lyapunov_constants: requires alpha < 1/(3 L_max)");
  LyapunovConstants c;
  c.delta = delta;
  c.a = delta / alpha;
  c.b = 1.0 / (2.0 * alpha) - delta / alpha - l_max / 4.0 - delta * l_max -
        alpha * delta * l_max * l_max / 2.0 + alpha * l_max * l_max / (4.0 * delta);
  c.c = c.b - alpha * l_max * l_max / (2.0 * delta);
  if (!(c.a > 0 && c.b > 0 && c.c > 0))
    throw std::runtime_error("lyapunov_constants: nonpositive constant, stepsize too large");
  return c;
}

double lyapunov_value(const Stacked& x, const Stacked& y, const Stacked& p_arg,
                      const Stacked& q_arg, double rho, const Problem& problem,
                      const MixingMatrix& w, const LyapunovConstants& c) {
  if (y.blocks.cwiseAbs().maxCoeff() > rho * (1.0 + 1e-12))
    return -std::numeric_limits<double>::infinity();
  double f = 0.0;
  for (int i = 0; i < x.agents(); ++i) f += agent_objective(problem, i, x.block(i));
  double inner = 0.0;
  for (int i = 0; i < x.agents(); ++i) inner += row_residual(x, w, i).dot(y.block(i));
  double ap = (x.blocks - p_arg.blocks).squaredNorm();
  double bq = (x.blocks - q_arg.blocks).squaredNorm();
  return f + inner - c.a * ap + c.b * bq;
}

std::vector<double> lyapunov_descent_margins(const std::vector<InnerTracePoint>& trace, double rho,
                                             const Problem& p, const MixingMatrix& w,
                                             const LyapunovConstants& c) {
  const int t_max = static_cast<int>(trace.size());
  std::vector<double> margins;
  if (t_max < 4) return margins;
  auto psi = [&](int t) {
    return lyapunov_value(trace[t].x, trace[t].y, trace[t + 1].x, trace[t - 1].x, rho, p, w, c);
  };
  margins.reserve(t_max - 3);
  for (int t = 1; t + 2 < t_max; ++t) {
    double dx_next = (trace[t + 1].x.blocks - trace[t].x.blocks).squaredNorm();
    double dx_prev = (trace[t].x.blocks - trace[t - 1].x.blocks).squaredNorm();
    margins.push_back(psi(t) - psi(t + 1) - c.c * (dx_next + dx_prev));
  }
  return margins;
}

RateFit linear_rate_fit(const std::vector<double>& distances, double floor) {
  std::vector<std::pair<double, double>> pts;  // (t, log d)
  for (size_t t = 0; t < distances.size(); ++t)
    if (distances[t] > floor) pts.emplace_back(static_cast<double>(t), std::log(distances[t]));
  if (pts.size() < 20)
    throw std::runtime_error("linear_rate_fit: insufficient data above the numerical floor");
  double n = static_cast<double>(pts.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (auto [tx, ty] : pts) {
    sx += tx;
    sy += ty;
    sxx += tx * tx;
    sxy += tx * ty;
    syy += ty * ty;
  }
  double denom = n * sxx - sx * sx;
  RateFit fit;
  fit.points = static_cast<int>(pts.size());
  fit.slope = (n * sxy - sx * sy) / denom;
  double ss_tot = syy - sy * sy / n;
  double intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0;
  for (auto [tx, ty] : pts) {
    double e = ty - (intercept + fit.slope * tx);
    ss_res += e * e;
  }
  fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

MetricsSample compute_metrics(const Stacked& x, const Stacked& y, const Problem& p,
                              const MixingMatrix& w, const OracleResult& oracle, long round,
                              double rho) {
  MetricsSample s;
  s.round = round;
  s.rho = rho;
  Eigen::VectorXd x_avg = x.average();
  s.objective_residual = std::abs(objective_value(p, x_avg) - oracle.f_star);
  double cons = 0.0;
  for (int i = 0; i < x.agents(); ++i) cons += (x.block(i) - x_avg).norm();
  s.consensus_violation = cons / x.agents();
  Eigen::VectorXd gsum = Eigen::VectorXd::Zero(p.dim);
  for (int i = 0; i < p.agents(); ++i) gsum += smooth_gradient(p, i, x_avg);
  s.optimality_residual = composite_gradient_norm(
      x_avg, gsum, p.kind == ProblemKind::ElasticNet ? p.agents() * p.lambda1 : 0.0);
  s.penalty = penalty_value(x, w, rho);
  s.stationarity_bound = stationarity_bound(x, y, p, w);
  return s;
}

}  // namespace dp2g
