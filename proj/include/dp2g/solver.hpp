#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "dp2g/disagreement.hpp"
#include "dp2g/mixing.hpp"
#include "dp2g/objectives.hpp"

namespace dp2g {

// Full per-agent memory: one primal vector, one dual vector, the
// extrapolated copy shared with neighbors, and the previous primal (needed
// transiently for extrapolation and diagnostics).
struct AgentState {
  Eigen::VectorXd x, y, x_bar, x_prev;
};

struct StepSizes {
  double alpha = 0.0;  // primal, < 1/(3 L_max)
  double sigma = 0.0;  // dual,   < 1/(alpha kappa_Z^2)
};

// alpha = 0.3 / L_max, sigma = sigma_fraction / (alpha kappa_Z^2).
// sigma_fraction 0.9 default, 0.8 for the elastic-net benchmark.
StepSizes default_stepsizes(double l_max, const SpectralReport& spectral, double sigma_fraction = 0.9);

struct HybridParams {
  double eps_abs = 1e-4;
  double eps_rel = 0.02;
  double beta_pen = 2.0;
  double quorum = 0.95;      // fraction of agents required under tau_i
  double worst_slack = 10.0; // worst residual must stay within slack * tau_i
};

// tau_i = max(eps_abs, eps_rel * |grad_i|) * (1 + beta_pen (1 - rho/rho_max)^2)
double hybrid_threshold(double rho, double rho_max, double grad_norm, const HybridParams& hp);

enum class StoppingMode { Strict, Hybrid };

struct Schedules {
  double rho0 = 1e-2;
  double beta = 1.2;
  double rho_max = 1e2;
  double eps0 = 0.1;    // eps_k = eps0 / k
  double delta0 = 0.1;  // delta_k = delta0 / k^2
  HybridParams hybrid;
  // Outer stabilization: |x_avg^{k+1} - x_avg^k| must fall below this
  // absolute tolerance before the run may stop.
  double stabilization_tol = 1e-5;

  double eps_k(int k) const { return eps0 / std::max(k, 1); }
  double delta_k(int k) const { return delta0 / (double(std::max(k, 1)) * std::max(k, 1)); }
  void validate() const;
};

// rho_{k+1} = min(beta rho_k, rho_max); nondecreasing, reaches the cap in
// ceil(log(rho_max/rho0)/log(beta)) updates.
double penalty_update(double rho, double beta, double rho_max);

// Componentwise clip of y + sigma*u_bar onto [-rho, rho].
void dual_step(AgentState& s, const Eigen::VectorXd& u_bar, double sigma, double rho);
// x <- local_prox(alpha, x - alpha (grad + v)); stores x_prev. Throws on
// non-finite result (divergence).
void primal_step(AgentState& s, const Eigen::VectorXd& grad, const Eigen::VectorXd& v, double alpha,
                 const Problem& p);
// x_bar <- 2x - x_prev.
void extrapolate(AgentState& s);

// Iterated neighbor-max; exact after diameter(g) rounds on a static graph.
std::vector<double> max_consensus(std::vector<double> values, const Graph& g, int rounds);

// Optional corruption applied to every exchanged message (disagreement
// residuals and broadcast duals).
using MessageCorruptor = std::function<void(Eigen::VectorXd&)>;

struct InnerEvent {
  int outer_k = 0;
  int inner_t = 0;   // 1-based within the current inner loop
  long round = 0;    // global communication round counter after this iteration
  double rho = 0;
  const std::vector<AgentState>& states;
  const std::vector<double>& residuals;  // per-agent composite residuals
};
using InnerObserver = std::function<void(const InnerEvent&)>;

struct InnerLoopConfig {
  double rho = 0;
  double rho_max = 0;
  StepSizes steps;
  StoppingMode mode = StoppingMode::Hybrid;
  double eps_k = 0;  // strict-mode tolerance
  HybridParams hybrid;
  int iteration_cap = 2000;
  long round_budget = -1;  // remaining global rounds (<0 = unlimited)
  int outer_k = 1;
  long round_base = 0;
};

struct InnerResult {
  int iterations = 0;
  long communication_rounds = 0;  // always 2 * iterations
  std::vector<double> residuals;  // per agent, at exit
  bool converged = false;
  std::string reason;  // "quorum_met" | "strict_met" | "iteration_cap" | "round_budget"
};

// One inner primal-dual loop at fixed rho. Each iteration: exchange x_bar,
// dual step, exchange y, primal step, extrapolate; the convergence test uses
// the freshest residual |grad f_i(x_i^new) + v_i|.
InnerResult inner_loop(std::vector<AgentState>& states, const Problem& p, const MixingMatrix& w,
                       const InnerLoopConfig& cfg, const MessageCorruptor& corrupt = nullptr,
                       const InnerObserver& observer = nullptr);

struct SolverOptions {
  StepSizes steps;               // alpha == 0 -> derived from default_stepsizes
  double sigma_fraction = 0.9;
  Schedules schedules;
  StoppingMode stopping = StoppingMode::Hybrid;
  int inner_cap = 2000;
  long round_cap = 5000;
  MessageCorruptor corrupt;      // empty = noise-free
};

struct SolveSummary {
  bool converged = false;
  long rounds = 0;                // 2 per inner iteration + 1 per outer exchange
  long max_consensus_rounds = 0;  // tracked separately
  int outer_iterations = 0;
  long inner_iterations = 0;
  double final_rho = 0;
  double final_dmax = 0;  // max-consensus value of mean-abs disagreement
  Stacked x, y;
  Eigen::VectorXd x_avg;
  std::vector<double> residuals;
};

// Two-layer run: inner primal-dual loops under penalty continuation,
// starting from x = y = 0, warm-started across outer iterations. Outer
// termination requires (i) max-consensus-verified disagreement below
// delta_k, (ii) the final inner loop stationarity below eps_k for all
// agents, and (iii) the averaged iterate movement below the stabilization
// tolerance.
SolveSummary run(const Problem& p, const MixingMatrix& w, const SolverOptions& opts,
                 const InnerObserver& observer = nullptr);

Stacked primal_stack(const std::vector<AgentState>& states);
Stacked dual_stack(const std::vector<AgentState>& states);

}  // namespace dp2g
