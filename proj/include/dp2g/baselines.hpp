#pragma once

#include <functional>
#include <string>

#include "dp2g/disagreement.hpp"
#include "dp2g/objectives.hpp"
#include "dp2g/solver.hpp"

namespace dp2g {

enum class BaselineAlgorithm { DgdFixed, DgdDiminishing, Extra, Nids };

std::string to_string(BaselineAlgorithm a);
BaselineAlgorithm baseline_from_string(const std::string& s);

struct BaselineConfig {
  BaselineAlgorithm algorithm = BaselineAlgorithm::DgdFixed;
  double alpha0 = 0.0;  // 0 -> stepsize rule from the benchmark protocol
  long round_cap = 5000;
  // Convergence is declared once both metrics fall below these targets
  // (taken from the reference run's final achieved values).
  double target_consensus = 0.0;
  double target_optimality = 0.0;
  MessageCorruptor corrupt;  // applied to the neighbor-averaged messages
  bool force_nonsmooth = false;  // baselines skip elastic net unless forced
};

// alpha = 0.9 (1 + lambda_n)/L_max for DGD-fixed and EXTRA,
// alpha0 = 2 (1 + lambda_n)/L_max for diminishing DGD, 0.9/L_max for NIDS.
double baseline_stepsize(BaselineAlgorithm a, double l_max, double lambda_n);

// One DGD step x_i <- sum_j w_ij x_j - alpha grad f_i(x_i); one round.
Stacked dgd_fixed_step(const Stacked& x, const MixingMatrix& w, const Problem& p, double alpha);

// Diminishing stepsize alpha_k = alpha0 / sqrt(k), k >= 1.
double dgd_diminishing_step(int k, double alpha0);

// EXTRA recursion with W~ = (W+I)/2; the first step is a plain DGD step.
Stacked extra_step(const Stacked& x_curr, const Stacked& x_prev, const MixingMatrix& w,
                   const Problem& p, double alpha);

// NIDS recursion x+ = W~ (2 x - x_prev - alpha (grad - grad_prev)) with
// W~ = (W+I)/2; the first step is plain gradient descent.
Stacked nids_step(const Stacked& x_curr, const Stacked& x_prev, const Stacked& grad_curr,
                  const Stacked& grad_prev, const MixingMatrix& w, double alpha);

struct BaselineRoundEvent {
  long round = 0;
  const Stacked& x;
};
using BaselineObserver = std::function<void(const BaselineRoundEvent&)>;

struct BaselineSummary {
  bool converged = false;
  long rounds = 0;
  Stacked x;
  Eigen::VectorXd x_avg;
};

// Shared driver: iterates the selected recursion from x = 0, one
// communication round per step, until the metric targets are met or the
// round cap is hit.
BaselineSummary run_baseline(const BaselineConfig& cfg, const Problem& p, const MixingMatrix& w,
                             const BaselineObserver& observer = nullptr);

}  // namespace dp2g
