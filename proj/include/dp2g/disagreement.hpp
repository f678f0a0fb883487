#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dp2g/mixing.hpp"

namespace dp2g {

// Stacked per-agent vectors x = col(x_1, ..., x_n), stored as an m x n
// matrix with one column per agent.
struct Stacked {
  Eigen::MatrixXd blocks;

  Stacked() = default;
  Stacked(int dim, int agents) : blocks(Eigen::MatrixXd::Zero(dim, agents)) {}

  int dim() const { return static_cast<int>(blocks.rows()); }
  int agents() const { return static_cast<int>(blocks.cols()); }
  auto block(int i) { return blocks.col(i); }
  auto block(int i) const { return blocks.col(i); }
  double norm() const { return blocks.norm(); }

  static Stacked consensual(const Eigen::VectorXd& v, int agents) {
    Stacked s;
    s.blocks = v.replicate(1, agents);
    return s;
  }

  Eigen::VectorXd average() const { return blocks.rowwise().mean(); }
};

// Row residual of the disagreement operator Z = (I - W) (x) I_m:
//   u_i = (1 - w_ii) x_i - sum_{j in N_i} w_ij x_j.
// The generic form takes any block accessor so tests can count which blocks
// are touched; only {i} and N_i are ever read.
template <class BlockFn>
Eigen::VectorXd row_residual_with(BlockFn&& block, const MixingMatrix& w, int i) {
  Eigen::VectorXd u = (1.0 - w.w(i, i)) * block(i);
  for (int j : w.graph.adjacency[i]) u.noalias() -= w.w(i, j) * block(j);
  return u;
}

// Adjoint row: v_i = (1 - w_ii) y_i - sum_{j in N_i} w_ji y_j. With W
// symmetric this is the same arithmetic as the row residual.
template <class BlockFn>
Eigen::VectorXd adjoint_residual_with(BlockFn&& block, const MixingMatrix& w, int i) {
  Eigen::VectorXd v = (1.0 - w.w(i, i)) * block(i);
  for (int j : w.graph.adjacency[i]) v.noalias() -= w.w(j, i) * block(j);
  return v;
}

Eigen::VectorXd row_residual(const Stacked& x, const MixingMatrix& w, int i);
Eigen::VectorXd adjoint_residual(const Stacked& y, const MixingMatrix& w, int i);

// rho * ||Zx||_1 = rho * sum_i ||u_i||_1.
double penalty_value(const Stacked& x, const MixingMatrix& w, double rho);

// Subgradient of ||Zx||_1 with the sign(0) = 0 selection:
//   g_i = (1 - w_ii) sign(u_i) - sum_{r : i in N_r} w_ri sign(u_r).
Stacked penalty_subgradient(const Stacked& x, const MixingMatrix& w);

}  // namespace dp2g
