#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dp2g {

enum class ProblemKind { Ridge, Logistic, ElasticNet };

std::string to_string(ProblemKind k);
ProblemKind problem_kind_from_string(const std::string& s);

// One agent's private data shard. `features` is d_i x m; `responses` holds
// regression targets or +-1 labels.
struct Shard {
  Eigen::MatrixXd features;
  Eigen::VectorXd responses;
};

// Per-agent objective collection. Smooth losses carry a common scalar
// `loss_scale` (see scale_to_unit_lipschitz); the elastic-net l1 term stays
// unscaled and is handled through local_prox. Immutable after generation.
struct Problem {
  ProblemKind kind = ProblemKind::Ridge;
  std::vector<Shard> shards;
  int dim = 0;
  double lambda = 0.0;    // ridge
  double lambda1 = 0.0;   // elastic net l1
  double lambda2 = 0.0;   // elastic net l2
  double loss_scale = 1.0;
  std::vector<double> lipschitz;          // per agent, after scaling
  double l_max = 0.0;
  std::vector<double> strong_convexity;   // per agent, after scaling (0 if merely convex)

  int agents() const { return static_cast<int>(shards.size()); }
  bool has_local_prox() const { return kind == ProblemKind::ElasticNet; }
};

struct GroundTruth {
  Eigen::VectorXd x_true;
  std::vector<int> support;  // nonzero indices (elastic net)
  double noise_sigma = 0.0;
};

struct DatasetSpec {
  ProblemKind kind = ProblemKind::Ridge;
  int agents = 20;
  int samples_per_agent = 500;
  int dim = 50;
  uint64_t seed = 0;
  int sparsity = -1;          // elastic net: nonzeros in x_true; -1 = dense
  double lambda = 1e-2;       // ridge
  double lambda1 = 5e-3;      // elastic net
  double lambda2 = 1e-2;      // elastic net
  double noise_sigma = 0.1;   // response noise (ridge / elastic net)
  double label_noise = 0.5;   // logistic: sign(a'x + zeta), zeta ~ N(0, label_noise^2)
  // Scale applied to the drawn ground truth. The logistic benchmark uses
  // 1/sqrt(dim) so the label noise flips a realistic fraction of labels;
  // at unit scale the signal dwarfs the noise and the labels are separable.
  double xtrue_scale = 1.0;
};

// Synthetic data per the benchmark protocol: standard-normal features,
// linear responses with Gaussian noise, noisy-sign logistic labels. The
// result is already passed through scale_to_unit_lipschitz. Deterministic
// in `spec.seed` (fixed draw order: x_true, then per agent features then
// noise).
std::pair<Problem, GroundTruth> generate_dataset(const DatasetSpec& spec);

// Fills problem.lipschitz / l_max / strong_convexity from the shards.
// sigma_max via dense SVD for dim <= 200, power iteration above.
void lipschitz_constants(Problem& p);

// Multiplies the smooth losses by 1/l_max when l_max > 1 so that the scaled
// l_max equals 1; problems already at l_max <= 1 are returned unchanged.
Problem scale_to_unit_lipschitz(Problem p);

// Gradient of the smooth part of f_i at x (the elastic-net l1 term is
// excluded; it enters through local_prox).
Eigen::VectorXd smooth_gradient(const Problem& p, int agent, const Eigen::VectorXd& x);

// Proximal map of the local nonsmooth term: soft threshold by
// step*lambda1 for elastic net, identity otherwise.
Eigen::VectorXd local_prox(const Problem& p, double step, const Eigen::VectorXd& v);

double agent_objective(const Problem& p, int agent, const Eigen::VectorXd& x);
// Global objective f(x) = sum_i f_i(x), local nonsmooth terms included.
double objective_value(const Problem& p, const Eigen::VectorXd& x);

// Norm of the minimal-norm element of grad_smooth + v + d(nonsmooth) at x.
// Reduces to |grad + v| for ridge/logistic; for elastic net the l1
// subdifferential is resolved coordinatewise (shrink inactive coordinates).
double composite_residual_norm(const Problem& p, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& grad_plus_v);

// Same resolution applied to a global gradient with l1 weight `l1_weight`
// (used by diagnostics at the averaged iterate, where the global objective
// carries n*lambda1).
double composite_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& grad,
                               double l1_weight);

// Shard-per-agent binary export with a JSON manifest; round-trips exactly at
// 64-bit float precision.
void save_dataset(const Problem& p, const GroundTruth& truth, const DatasetSpec& spec,
                  const std::string& dir);
std::pair<Problem, GroundTruth> load_dataset(const std::string& dir);

}  // namespace dp2g
