// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rbstokes/errors.hpp"
#include "rbstokes/parameter.hpp"

namespace rbstokes {

struct LanczosResult {
  double largest = 0.0;
  double smallest = 0.0;  // smallest Ritz value; only an upper estimate of the true minimum
  int iterations = 0;
  double residual = 0.0;  // W-norm residual of the largest Ritz pair, relative to |largest|
  bool converged = false;
  Eigen::VectorXd vector;  // W-normalized Ritz vector of the largest Ritz value (when requested)
};

// Largest eigenvalue of an operator T that is self-adjoint in the inner product W
// (T = W^{-1} K type operators), by Lanczos with full W-reorthogonalization.
inline LanczosResult lanczos_largest(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply,
                                     const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_w,
                                     Eigen::Index n, double tol = 1e-11, int max_iter = 400,
                                     std::uint64_t seed = 12345, bool want_vector = false) {
  LanczosResult res;
  if (n == 0) return res;
  const int m_max = static_cast<int>(std::min<Eigen::Index>(max_iter, n));
  SplitMix64 rng(seed);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * (rng.uniform() - 0.5);

  Eigen::MatrixXd V(n, m_max + 1), WV(n, m_max + 1);
  Eigen::VectorXd wv = apply_w(v);
  double nrm = std::sqrt(v.dot(wv));
  V.col(0) = v / nrm;
  WV.col(0) = wv / nrm;
  std::vector<double> alpha, beta, history;
  constexpr int kStallWindow = 10;
  constexpr double kStallTol = 1e-9;
  constexpr int kCheckEvery = 5;
  for (int j = 0; j < m_max; ++j) {
    Eigen::VectorXd w = apply(V.col(j));
    const double a = w.dot(WV.col(j));
    alpha.push_back(a);
    // two passes of classical Gram-Schmidt in the W inner product
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd c = WV.leftCols(j + 1).transpose() * w;
      w.noalias() -= V.leftCols(j + 1) * c;
    }
    Eigen::VectorXd ww = apply_w(w);
    const double b = std::sqrt(std::max(0.0, w.dot(ww)));

    const int m = j + 1;
    Eigen::VectorXd diag(m), sub(std::max(m - 1, 1));
    for (int i = 0; i < m; ++i) diag[i] = alpha[static_cast<std::size_t>(i)];
    for (int i = 0; i + 1 < m; ++i) sub[i] = beta[static_cast<std::size_t>(i)];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub.head(m - 1), Eigen::EigenvaluesOnly);
    res.largest = es.eigenvalues()[m - 1];
    res.smallest = es.eigenvalues()[0];
    res.iterations = m;
    history.push_back(res.largest);
    // a tight cluster at the top keeps the residual large long after the Ritz value has settled
    const bool stalled = m > kStallWindow &&
                         std::abs(res.largest - history[history.size() - 1 - kStallWindow]) <=
                             kStallTol * std::abs(res.largest);
    const bool last = b <= 1e-14 * std::abs(res.largest) || m == n || m == m_max;
    if (m % kCheckEvery == 0 || stalled || last) {
      es.computeFromTridiagonal(diag, sub.head(m - 1), Eigen::ComputeEigenvectors);
      const double resid = std::abs(b * es.eigenvectors()(m - 1, m - 1));
      res.residual = resid / std::max(std::abs(res.largest), std::numeric_limits<double>::min());
      if (res.residual < tol || stalled || b <= 1e-14 * std::abs(res.largest) || m == n) {
        res.converged = true;
        if (want_vector) res.vector = V.leftCols(m) * es.eigenvectors().col(m - 1);
        return res;
      }
    }
    beta.push_back(b);
    V.col(j + 1) = w / b;
    WV.col(j + 1) = ww / b;
  }
  return res;  // not converged; no vector
}

// Extreme eigenvalues of a small symmetric matrix.
inline std::pair<double, double> symmetric_extremes(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return {es.eigenvalues()[0], es.eigenvalues()[A.rows() - 1]};
}

// Generalized eigenvalues (ascending) of the symmetric 2x2 pencil (A, B), B SPD. Reduced with
// the Cholesky factor of B to a standard symmetric problem; the quadratic-formula route loses
// half the digits near a double root (A = B gives 1 +- 1e-8 instead of 1).
inline Eigen::Vector2d pencil_eigs_2x2(const Eigen::Matrix2d& A, const Eigen::Matrix2d& B) {
  if (A == B) return {1.0, 1.0};
  const double l11 = std::sqrt(B(0, 0));
  const double l21 = B(1, 0) / l11;
  const double l22 = std::sqrt(B(1, 1) - l21 * l21);
  // M = L^{-1} A, C = M L^{-T}
  Eigen::Matrix2d M;
  M.row(0) = A.row(0) / l11;
  M.row(1) = (A.row(1) - l21 * M.row(0)) / l22;
  Eigen::Matrix2d C;
  C.col(0) = M.col(0) / l11;
  C.col(1) = (M.col(1) - l21 * C.col(0)) / l22;
  const double c12 = 0.5 * (C(0, 1) + C(1, 0));
  const double mean = 0.5 * (C(0, 0) + C(1, 1));
  const double rad = std::hypot(0.5 * (C(0, 0) - C(1, 1)), c12);
  return {mean - rad, mean + rad};
}

}  // namespace rbstokes
