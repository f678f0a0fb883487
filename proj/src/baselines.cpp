#include "dp2g/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace dp2g {

std::string to_string(BaselineAlgorithm a) {
  switch (a) {
    case BaselineAlgorithm::DgdFixed: return "dgd_fixed";
    case BaselineAlgorithm::DgdDiminishing: return "dgd_diminishing";
    case BaselineAlgorithm::Extra: return "extra";
    case BaselineAlgorithm::Nids: return "nids";
  }
  return "?";
}

BaselineAlgorithm baseline_from_string(const std::string& s) {
  if (s == "dgd_fixed") return BaselineAlgorithm::DgdFixed;
  if (s == "dgd_diminishing") return BaselineAlgorithm::DgdDiminishing;
  if (s == "extra") return BaselineAlgorithm::Extra;
  if (s == "nids") return BaselineAlgorithm::Nids;
  throw std::invalid_argument("unknown baseline: " + s);
}

double baseline_stepsize(BaselineAlgorithm a, double l_max, double lambda_n) {
  switch (a) {
    case BaselineAlgorithm::DgdFixed:
    case BaselineAlgorithm::Extra:
      return 0.9 * (1.0 + lambda_n) / l_max;
    case BaselineAlgorithm::DgdDiminishing:
      return 2.0 * (1.0 + lambda_n) / l_max;
    case BaselineAlgorithm::Nids:
      return 0.9 / l_max;  // network-independent
  }
  return 0.0;
}

namespace {

Stacked gradient_stack(const Problem& p, const Stacked& x) {
  Stacked g(x.dim(), x.agents());
  for (int i = 0; i < x.agents(); ++i) g.block(i) = smooth_gradient(p, i, x.block(i));
  return g;
}

// W-mix of the stacked iterate. The per-agent mixed vector is the unit of
// exchange, so link noise is injected here.
Stacked mix(const Stacked& x, const MixingMatrix& w, const MessageCorruptor& corrupt) {
  Stacked out(x.dim(), x.agents());
  out.blocks = x.blocks * w.w.transpose();  // column i = sum_j w_ij x_j
  if (corrupt) {
    for (int i = 0; i < out.agents(); ++i) {
      Eigen::VectorXd msg = out.block(i);
      corrupt(msg);
      out.block(i) = msg;
    }
  }
  return out;
}

}  // namespace

Stacked dgd_fixed_step(const Stacked& x, const MixingMatrix& w, const Problem& p, double alpha) {
  if (!(alpha > 0)) throw std::invalid_argument("dgd: alpha must be positive");
  Stacked next = mix(x, w, nullptr);
  next.blocks -= alpha * gradient_stack(p, x).blocks;
  return next;
}

double dgd_diminishing_step(int k, double alpha0) {
  if (k < 1) throw std::invalid_argument("dgd_diminishing: k must be >= 1");
  return alpha0 / std::sqrt(static_cast<double>(k));
}

Stacked extra_step(const Stacked& x_curr, const Stacked& x_prev, const MixingMatrix& w,
                   const Problem& p, double alpha) {
  Stacked g_curr = gradient_stack(p, x_curr);
  Stacked g_prev = gradient_stack(p, x_prev);
  Stacked mixed = mix(x_curr, w, nullptr);
  Stacked mixed_prev = mix(x_prev, w, nullptr);
  Stacked next(x_curr.dim(), x_curr.agents());
  // x+ = (I+W) x - (I+W)/2 x_prev - alpha (g - g_prev)
  next.blocks = x_curr.blocks + mixed.blocks - 0.5 * (x_prev.blocks + mixed_prev.blocks) -
                alpha * (g_curr.blocks - g_prev.blocks);
  return next;
}

Stacked nids_step(const Stacked& x_curr, const Stacked& x_prev, const Stacked& grad_curr,
                  const Stacked& grad_prev, const MixingMatrix& w, double alpha) {
  Stacked s(x_curr.dim(), x_curr.agents());
  s.blocks = 2.0 * x_curr.blocks - x_prev.blocks - alpha * (grad_curr.blocks - grad_prev.blocks);
  Stacked mixed = mix(s, w, nullptr);
  Stacked next(x_curr.dim(), x_curr.agents());
  next.blocks = 0.5 * (s.blocks + mixed.blocks);  // W~ = (W+I)/2
  return next;
}

BaselineSummary run_baseline(const BaselineConfig& cfg, const Problem& p, const MixingMatrix& w,
                             const BaselineObserver& observer) {
  if (cfg.round_cap <= 0) throw std::invalid_argument("run_baseline: round_cap must be positive");
  if (p.has_local_prox() && !cfg.force_nonsmooth)
    throw std::invalid_argument(
        "run_baseline: baselines run smooth objectives only; set force_nonsmooth to override");

  const int n = p.agents();
  double alpha = cfg.alpha0 > 0 ? cfg.alpha0 : baseline_stepsize(cfg.algorithm, p.l_max, w.lambda_n());

  Stacked x(p.dim, n);
  Stacked x_prev(p.dim, n), g_prev(p.dim, n), mixed_prev(p.dim, n);
  bool have_prev = false;

  BaselineSummary out;
  for (long r = 1; r <= cfg.round_cap; ++r) {
    Stacked g = gradient_stack(p, x);
    Stacked next(p.dim, n);
    Stacked mixed(p.dim, n);
    switch (cfg.algorithm) {
      case BaselineAlgorithm::DgdFixed:
        mixed = mix(x, w, cfg.corrupt);
        next.blocks = mixed.blocks - alpha * g.blocks;
        break;
      case BaselineAlgorithm::DgdDiminishing:
        mixed = mix(x, w, cfg.corrupt);
        next.blocks = mixed.blocks - dgd_diminishing_step(static_cast<int>(r), alpha) * g.blocks;
        break;
      case BaselineAlgorithm::Extra:
        mixed = mix(x, w, cfg.corrupt);
        if (!have_prev) {
          next.blocks = mixed.blocks - alpha * g.blocks;
        } else {
          // (I+W)/2 x_prev reuses the mix already exchanged last round.
          next.blocks = x.blocks + mixed.blocks - 0.5 * (x_prev.blocks + mixed_prev.blocks) -
                        alpha * (g.blocks - g_prev.blocks);
        }
        break;
      case BaselineAlgorithm::Nids:
        if (!have_prev) {
          next.blocks = x.blocks - alpha * g.blocks;
        } else {
          Stacked s(p.dim, n);
          s.blocks = 2.0 * x.blocks - x_prev.blocks - alpha * (g.blocks - g_prev.blocks);
          Stacked sm = mix(s, w, cfg.corrupt);
          next.blocks = 0.5 * (s.blocks + sm.blocks);
        }
        break;
    }
    x_prev = x;
    g_prev = g;
    mixed_prev = mixed;
    x = next;
    have_prev = true;
    out.rounds = r;

    if (!x.blocks.allFinite()) {
      // A divergent trajectory can never meet the targets; charge the full
      // budget and stop instead of propagating non-finite values.
      out.rounds = cfg.round_cap;
      out.converged = false;
      out.x = x_prev;
      out.x_avg = x_prev.average();
      return out;
    }

    if (observer) observer(BaselineRoundEvent{r, x});

    Eigen::VectorXd x_avg = x.average();
    double cons = 0.0;
    for (int i = 0; i < n; ++i) cons += (x.block(i) - x_avg).norm();
    cons /= n;
    Eigen::VectorXd gsum = Eigen::VectorXd::Zero(p.dim);
    for (int i = 0; i < n; ++i) gsum += smooth_gradient(p, i, x_avg);
    double opt = composite_gradient_norm(x_avg, gsum,
                                         p.kind == ProblemKind::ElasticNet ? n * p.lambda1 : 0.0);
    if (cons <= cfg.target_consensus && opt <= cfg.target_optimality) {
      out.converged = true;
      break;
    }
  }
  out.x = x;
  out.x_avg = x.average();
  return out;
}

}  // namespace dp2g
