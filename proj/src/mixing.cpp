#include "dp2g/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dp2g {

namespace {
constexpr double kMatrixTol = 1e-12;  // entries are small-denominator rationals
constexpr double kEigenTol = 1e-9;
}  // namespace

MixingMatrix metropolis_weights(const Graph& g) {
  if (!g.is_connected()) throw std::invalid_argument("metropolis_weights: graph must be connected");
  const int n = g.n;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (auto [i, j] : g.edges) {
    double wij = 1.0 / (1.0 + std::max(g.degree(i), g.degree(j)));
    w(i, j) = wij;
    w(j, i) = wij;
  }
  for (int i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();

  MixingMatrix m;
  m.graph = g;
  m.w = std::move(w);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.w);
  m.eigenvalues = es.eigenvalues().reverse();  // descending
  return m;
}

SpectralReport validate_mixing(const MixingMatrix& m) {
  const auto& w = m.w;
  const int n = m.size();
  if (w.rows() != w.cols() || n != m.graph.n)
    throw std::invalid_argument("validate_mixing: matrix size does not match graph");

  auto fail = [](const std::string& what) { throw std::runtime_error("mixing matrix invalid: " + what); };

  // Condition 1: sparsity pattern and positive edge weights.
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  for (auto [i, j] : m.graph.edges) adj(i, j) = adj(j, i) = 1.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (adj(i, j) == 0.0 && std::abs(w(i, j)) > kMatrixTol) {
        std::ostringstream os;
        os << "nonzero weight " << w(i, j) << " at non-edge (" << i << "," << j << ")";
        fail(os.str());
      }
      if (adj(i, j) == 1.0 && !(w(i, j) > 0.0)) {
        std::ostringstream os;
        os << "edge (" << i << "," << j << ") must carry positive weight, got " << w(i, j);
        fail(os.str());
      }
    }
  }

  // Condition 2: symmetry.
  double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
  if (asym > kMatrixTol) {
    std::ostringstream os;
    os << "not symmetric, max |W - W^T| = " << asym;
    fail(os.str());
  }

  // Condition 3: doubly stochastic.
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  double row_err = (w * ones - ones).cwiseAbs().maxCoeff();
  double col_err = (w.transpose() * ones - ones).cwiseAbs().maxCoeff();
  if (row_err > kMatrixTol || col_err > kMatrixTol) {
    std::ostringstream os;
    os << "rows/columns must sum to 1 (row err " << row_err << ", col err " << col_err << ")";
    fail(os.str());
  }

  // Condition 4: -I < W <= I, with lambda_1 = 1 simple.
  const auto& ev = m.eigenvalues;
  double lambda1 = ev(0), lambda2 = ev.size() > 1 ? ev(1) : -1.0, lambdan = ev(ev.size() - 1);
  if (std::abs(lambda1 - 1.0) > kEigenTol) {
    std::ostringstream os;
    os << "largest eigenvalue must be 1, got " << lambda1;
    fail(os.str());
  }
  if (!(lambdan > -1.0 + kEigenTol)) {
    std::ostringstream os;
    os << "smallest eigenvalue must exceed -1, got " << lambdan;
    fail(os.str());
  }
  if (!(lambda2 < 1.0 - kEigenTol)) {
    std::ostringstream os;
    os << "unit eigenvalue not simple (lambda_2 = " << lambda2 << "); graph disconnected?";
    fail(os.str());
  }

  SpectralReport report;
  report.lambda_n = lambdan;
  report.zeta = std::max(std::abs(lambda2), std::abs(lambdan));
  report.spectral_gap = 1.0 - report.zeta;
  report.kappa_z = 1.0 - lambdan;
  report.diameter = m.graph.diameter();
  return report;
}

}  // namespace dp2g
