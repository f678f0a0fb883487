#include "dp2g/solver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dp2g {

void Schedules::validate() const {
  if (!(beta > 1.0)) throw std::invalid_argument("schedules: beta must exceed 1");
  if (!(rho0 > 0.0) || !(rho0 <= rho_max) || !std::isfinite(rho_max))
    throw std::invalid_argument("schedules: need 0 < rho0 <= rho_max < inf");
  if (!(eps0 > 0.0) || !(delta0 > 0.0))
    throw std::invalid_argument("schedules: tolerance sequences must be positive");
}

StepSizes default_stepsizes(double l_max, const SpectralReport& spectral, double sigma_fraction) {
  if (!(l_max > 0.0)) throw std::invalid_argument("default_stepsizes: degenerate problem, L_max must be positive");
  if (!(sigma_fraction > 0.0) || !(sigma_fraction < 1.0))
    throw std::invalid_argument("default_stepsizes: sigma_fraction must lie in (0,1)");
  StepSizes s;
  s.alpha = 0.3 / l_max;
  s.sigma = sigma_fraction / (s.alpha * spectral.kappa_z * spectral.kappa_z);
  return s;
}

double hybrid_threshold(double rho, double rho_max, double grad_norm, const HybridParams& hp) {
  double base = std::max(hp.eps_abs, hp.eps_rel * grad_norm);
  double off = 1.0 - rho / rho_max;
  return base * (1.0 + hp.beta_pen * off * off);
}

double penalty_update(double rho, double beta, double rho_max) {
  return std::min(beta * rho, rho_max);
}

void dual_step(AgentState& s, const Eigen::VectorXd& u_bar, double sigma, double rho) {
  s.y = (s.y + sigma * u_bar).cwiseMax(-rho).cwiseMin(rho);
}

void primal_step(AgentState& s, const Eigen::VectorXd& grad, const Eigen::VectorXd& v, double alpha,
                 const Problem& p) {
  s.x_prev = s.x;
  s.x = local_prox(p, alpha, s.x - alpha * (grad + v));
  if (!s.x.allFinite()) throw std::runtime_error("primal_step: divergence, non-finite iterate");
}

void extrapolate(AgentState& s) { s.x_bar = 2.0 * s.x - s.x_prev; }

std::vector<double> max_consensus(std::vector<double> values, const Graph& g, int rounds) {
  std::vector<double> next(values.size());
  for (int r = 0; r < rounds; ++r) {
    for (int i = 0; i < g.n; ++i) {
      double m = values[i];
      for (int j : g.adjacency[i]) m = std::max(m, values[j]);
      next[i] = m;
    }
    values.swap(next);
  }
  return values;
}

Stacked primal_stack(const std::vector<AgentState>& states) {
  Stacked s(static_cast<int>(states[0].x.size()), static_cast<int>(states.size()));
  for (size_t i = 0; i < states.size(); ++i) s.block(static_cast<int>(i)) = states[i].x;
  return s;
}

Stacked dual_stack(const std::vector<AgentState>& states) {
  Stacked s(static_cast<int>(states[0].y.size()), static_cast<int>(states.size()));
  for (size_t i = 0; i < states.size(); ++i) s.block(static_cast<int>(i)) = states[i].y;
  return s;
}

InnerResult inner_loop(std::vector<AgentState>& states, const Problem& p, const MixingMatrix& w,
                       const InnerLoopConfig& cfg, const MessageCorruptor& corrupt,
                       const InnerObserver& observer) {
  const int n = static_cast<int>(states.size());
  InnerResult result;
  result.residuals.assign(n, std::numeric_limits<double>::infinity());

  std::vector<Eigen::VectorXd> grads(n), u(n), v(n);
  for (int i = 0; i < n; ++i) grads[i] = smooth_gradient(p, i, states[i].x);

  auto bar_block = [&states](int j) -> const Eigen::VectorXd& { return states[j].x_bar; };

  while (result.iterations < cfg.iteration_cap) {
    if (cfg.round_budget >= 0 && result.communication_rounds + 2 > cfg.round_budget) {
      result.reason = "round_budget";
      return result;
    }

    // Exchange extrapolated primals, form disagreement residuals.
    for (int i = 0; i < n; ++i) {
      u[i] = row_residual_with(bar_block, w, i);
      if (corrupt) corrupt(u[i]);
    }
    for (int i = 0; i < n; ++i) dual_step(states[i], u[i], cfg.steps.sigma, cfg.rho);

    // Exchange fresh duals (one broadcast draw per agent when noisy), form
    // adjoint residuals; each agent keeps its own dual uncorrupted.
    if (corrupt) {
      std::vector<Eigen::VectorXd> bcast(n);
      for (int i = 0; i < n; ++i) {
        bcast[i] = states[i].y;
        corrupt(bcast[i]);
      }
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd vi = (1.0 - w.w(i, i)) * states[i].y;
        for (int j : w.graph.adjacency[i]) vi.noalias() -= w.w(j, i) * bcast[j];
        v[i] = std::move(vi);
      }
    } else {
      for (int i = 0; i < n; ++i)
        v[i] = adjoint_residual_with([&states](int j) -> const Eigen::VectorXd& { return states[j].y; }, w, i);
    }

    for (int i = 0; i < n; ++i) {
      primal_step(states[i], grads[i], v[i], cfg.steps.alpha, p);
      extrapolate(states[i]);
    }

    result.iterations += 1;
    result.communication_rounds += 2;

    // Residual test with the freshest quantities: gradient at the new
    // iterate, adjoint residual from the dual just exchanged.
    for (int i = 0; i < n; ++i) {
      grads[i] = smooth_gradient(p, i, states[i].x);
      result.residuals[i] = composite_residual_norm(p, states[i].x, grads[i] + v[i]);
    }

    if (observer) {
      InnerEvent ev{cfg.outer_k, result.iterations, cfg.round_base + result.communication_rounds,
                    cfg.rho, states, result.residuals};
      observer(ev);
    }

    if (cfg.mode == StoppingMode::Strict) {
      bool all_ok = true;
      for (double r : result.residuals)
        if (!(r <= cfg.eps_k)) { all_ok = false; break; }
      if (all_ok) {
        result.converged = true;
        result.reason = "strict_met";
        return result;
      }
    } else {
      int ok = 0;
      bool worst_ok = true;
      for (int i = 0; i < n; ++i) {
        double tau = hybrid_threshold(cfg.rho, cfg.rho_max, grads[i].norm(), cfg.hybrid);
        if (result.residuals[i] <= tau) ++ok;
        if (result.residuals[i] > cfg.hybrid.worst_slack * tau) worst_ok = false;
      }
      if (ok >= static_cast<int>(std::ceil(cfg.hybrid.quorum * n)) && worst_ok) {
        result.converged = true;
        result.reason = "quorum_met";
        return result;
      }
    }
  }
  result.reason = "iteration_cap";
  return result;
}

SolveSummary run(const Problem& p, const MixingMatrix& w, const SolverOptions& opts,
                 const InnerObserver& observer) {
  opts.schedules.validate();
  const int n = p.agents();
  const int m = p.dim;
  if (n != w.size()) throw std::invalid_argument("run: problem/network size mismatch");

  SpectralReport spectral = validate_mixing(w);
  StepSizes steps = opts.steps;
  if (steps.alpha == 0.0) steps = default_stepsizes(p.l_max, spectral, opts.sigma_fraction);
  if (!(steps.alpha > 0) || !(steps.alpha < 1.0 / (3.0 * p.l_max) + 1e-15))
    throw std::invalid_argument("run: primal step violates alpha < 1/(3 L_max)");
  const int mc_budget = spectral.diameter + 2;

  std::vector<AgentState> states(n);
  for (auto& s : states) {
    s.x = Eigen::VectorXd::Zero(m);
    s.y = Eigen::VectorXd::Zero(m);
    s.x_bar = Eigen::VectorXd::Zero(m);
    s.x_prev = Eigen::VectorXd::Zero(m);
  }

  SolveSummary out;
  double rho = opts.schedules.rho0;
  Eigen::VectorXd x_avg_prev = Eigen::VectorXd::Zero(m);
  int k = 1;

  while (true) {
    InnerLoopConfig cfg;
    cfg.rho = rho;
    cfg.rho_max = opts.schedules.rho_max;
    cfg.steps = steps;
    cfg.mode = opts.stopping;
    cfg.eps_k = opts.schedules.eps_k(k);
    cfg.hybrid = opts.schedules.hybrid;
    cfg.iteration_cap = opts.inner_cap;
    cfg.round_budget = opts.round_cap - out.rounds;
    cfg.outer_k = k;
    cfg.round_base = out.rounds;

    InnerResult inner = inner_loop(states, p, w, cfg, opts.corrupt, observer);
    out.rounds += inner.communication_rounds;
    out.inner_iterations += inner.iterations;

    // Outer exchange of the fresh primals to evaluate disagreement, then a
    // max-consensus sweep so every agent can verify the worst residual. The
    // certificate is the per-coordinate mean l1 disagreement with a 1/sqrt(n)
    // network normalization, making the delta_k schedule dimension-independent.
    out.rounds += 1;
    Stacked x = primal_stack(states);
    const double d_scale = m * std::sqrt(double(n));
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) d[i] = row_residual(x, w, i).lpNorm<1>() / d_scale;
    double dmax = max_consensus(d, w.graph, mc_budget)[0];
    out.max_consensus_rounds += mc_budget;

    Eigen::VectorXd x_avg = x.average();
    double move = (x_avg - x_avg_prev).norm();
    double delta_k = opts.schedules.delta_k(k);

    bool stationarity_ok = inner.converged;
    for (double r : inner.residuals)
      if (!(r <= cfg.eps_k)) { stationarity_ok = false; break; }
    bool consensus_ok = dmax <= delta_k;
    bool stabilized = move <= opts.schedules.stabilization_tol;

    out.outer_iterations = k;
    out.final_rho = rho;
    out.final_dmax = dmax;
    out.residuals = inner.residuals;

    if (consensus_ok && stationarity_ok && stabilized) {
      out.converged = true;
      break;
    }
    if (out.rounds >= opts.round_cap) {
      out.converged = false;
      break;
    }
    x_avg_prev = x_avg;
    rho = penalty_update(rho, opts.schedules.beta, opts.schedules.rho_max);
    k += 1;
  }

  out.x = primal_stack(states);
  out.y = dual_stack(states);
  out.x_avg = out.x.average();
  return out;
}

}  // namespace dp2g
