#pragma once

#include <Eigen/Dense>

#include "dp2g/graph.hpp"

namespace dp2g {

// Symmetric doubly stochastic weight matrix matching the graph sparsity.
// Eigenvalues are computed once at construction and cached (every stepsize
// rule reads lambda_n). Immutable after construction; safe to share across
// threads read-only.
struct MixingMatrix {
  Graph graph;
  Eigen::MatrixXd w;
  Eigen::VectorXd eigenvalues;  // sorted descending, lambda_1 first

  int size() const { return static_cast<int>(w.rows()); }
  double lambda_2() const { return eigenvalues(1); }
  double lambda_n() const { return eigenvalues(eigenvalues.size() - 1); }
};

// Spectral summary used by the stepsize rules and diagnostics.
//   zeta    = max(|lambda_2|, |lambda_n|), spectral gap = 1 - zeta
//   kappa_z = ||Z||_2 = 1 - lambda_n
struct SpectralReport {
  double lambda_n = 0;
  double zeta = 0;
  double spectral_gap = 0;
  double kappa_z = 0;
  int diameter = 0;
};

// Metropolis rule: w_ij = 1 / (1 + max(deg_i, deg_j)) on edges, diagonal
// fills the row sum to one. Guarantees all doubly-stochastic conditions on
// connected graphs.
MixingMatrix metropolis_weights(const Graph& g);

// Checks the four mixing-matrix conditions (sparsity/positivity, symmetry,
// double stochasticity, -I < W <= I) plus simplicity of the unit eigenvalue.
// Throws std::runtime_error naming the violated condition.
SpectralReport validate_mixing(const MixingMatrix& w);

}  // namespace dp2g
