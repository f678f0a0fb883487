#include "dp2g/disagreement.hpp"

namespace dp2g {

namespace {
inline double sign0(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }
}  // namespace

Eigen::VectorXd row_residual(const Stacked& x, const MixingMatrix& w, int i) {
  return row_residual_with([&x](int j) { return x.block(j); }, w, i);
}

Eigen::VectorXd adjoint_residual(const Stacked& y, const MixingMatrix& w, int i) {
  return adjoint_residual_with([&y](int j) { return y.block(j); }, w, i);
}

double penalty_value(const Stacked& x, const MixingMatrix& w, double rho) {
  if (rho < 0) throw std::invalid_argument("penalty_value: rho must be nonnegative");
  if (rho == 0) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < x.agents(); ++i) acc += row_residual(x, w, i).lpNorm<1>();
  return rho * acc;
}

Stacked penalty_subgradient(const Stacked& x, const MixingMatrix& w) {
  const int n = x.agents();
  Stacked signs(x.dim(), n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd u = row_residual(x, w, i);
    for (int c = 0; c < u.size(); ++c) signs.block(i)(c) = sign0(u(c));
  }
  // r : i in N_r coincides with r in N_i on undirected graphs, so the
  // assembly is the adjoint residual applied to the sign field.
  Stacked g(x.dim(), n);
  for (int i = 0; i < n; ++i)
    g.block(i) = adjoint_residual_with([&signs](int j) { return signs.block(j); }, w, i);
  return g;
}

}  // namespace dp2g
