// SPDX-License-Identifier: Apache-2.0
// Independent reference computations used by the tests.
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rbstokes/rbstokes.hpp"

namespace oracle {

using namespace rbstokes;

// 7-point degree-5 rule on the unit reference triangle (weights sum to 1/2).
inline std::vector<std::array<double, 3>> radon7() {
  const double s15 = std::sqrt(15.0);
  const double a1 = (6.0 - s15) / 21.0, a2 = (6.0 + s15) / 21.0;
  const double w1 = (155.0 - s15) / 2400.0, w2 = (155.0 + s15) / 2400.0;
  return {{1.0 / 3.0, 1.0 / 3.0, 9.0 / 80.0},
          {a1, a1, w1},
          {1 - 2 * a1, a1, w1},
          {a1, 1 - 2 * a1, w1},
          {a2, a2, w2},
          {1 - 2 * a2, a2, w2},
          {a2, 1 - 2 * a2, w2}};
}

// P2 shape functions written out directly in (xi, eta).
inline void p2_direct(double x, double y, double* v, double (*g)[2]) {
  const double l0 = 1 - x - y;
  v[0] = l0 * (2 * l0 - 1);
  v[1] = x * (2 * x - 1);
  v[2] = y * (2 * y - 1);
  v[3] = 4 * l0 * x;
  v[4] = 4 * x * y;
  v[5] = 4 * y * l0;
  g[0][0] = 1 - 4 * l0; g[0][1] = 1 - 4 * l0;
  g[1][0] = 4 * x - 1;  g[1][1] = 0;
  g[2][0] = 0;          g[2][1] = 4 * y - 1;
  g[3][0] = 4 * (l0 - x); g[3][1] = -4 * x;
  g[4][0] = 4 * y;      g[4][1] = 4 * x;
  g[5][0] = -4 * y;     g[5][1] = 4 * (l0 - y);
}

struct DirectForms {
  Eigen::MatrixXd M, A, B, C;
};

// Assembles m, a, b, c on the physically mapped mesh (no affine expansion involved).
inline DirectForms direct_assembly(const TruthDiscretization& sp, const AffineGeometry& geo, const Parameter& mu) {
  const auto maps = geo.evaluate_affine_maps(mu);
  const int nu = sp.n_velocity, np = sp.n_pressure, nn = sp.n_nodes;
  DirectForms d{Eigen::MatrixXd::Zero(nu, nu), Eigen::MatrixXd::Zero(nu, nu), Eigen::MatrixXd::Zero(np, nu),
                Eigen::MatrixXd::Zero(np, np)};
  const auto rule = radon7();
  for (std::size_t t = 0; t < sp.mesh.triangles.size(); ++t) {
    const auto& tri = sp.mesh.triangles[t];
    const auto& map = maps[static_cast<std::size_t>(sp.mesh.subdomain_of[t])];
    Eigen::Vector2d x[3];
    for (int i = 0; i < 3; ++i) x[i] = map.apply(sp.mesh.vertices[tri[i]]);
    Eigen::Matrix2d J;
    J << x[1] - x[0], x[2] - x[0];
    const double adet = std::abs(J.determinant());
    const Eigen::Matrix2d Jinv = J.inverse();
    const auto& nodes = sp.element_nodes[t];
    for (const auto& q : rule) {
      double v[6], g[6][2];
      p2_direct(q[0], q[1], v, g);
      double gx[6][2];
      for (int a = 0; a < 6; ++a) {
        gx[a][0] = g[a][0] * Jinv(0, 0) + g[a][1] * Jinv(1, 0);
        gx[a][1] = g[a][0] * Jinv(0, 1) + g[a][1] * Jinv(1, 1);
      }
      const double psi[3] = {1 - q[0] - q[1], q[0], q[1]};
      const double w = q[2] * adet;
      for (int ci = 0; ci < 2; ++ci) {
        for (int a = 0; a < 6; ++a) {
          const int ia = sp.full_to_free[static_cast<std::size_t>(ci * nn + nodes[a])];
          if (ia < 0) continue;
          for (int b = 0; b < 6; ++b) {
            const int ib = sp.full_to_free[static_cast<std::size_t>(ci * nn + nodes[b])];
            if (ib < 0) continue;
            d.M(ia, ib) += w * v[a] * v[b];
            d.A(ia, ib) += w * (gx[a][0] * gx[b][0] + gx[a][1] * gx[b][1]);
          }
          for (int c = 0; c < 3; ++c) d.B(tri[c], ia) -= w * psi[c] * gx[a][ci];
        }
      }
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) d.C(tri[a], tri[b]) += w * psi[a] * psi[b];
    }
  }
  return d;
}

inline double rel_frobenius(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

// Smallest and largest generalized eigenvalues of (A, X) for symmetric A and SPD X.
inline Eigen::VectorXd dense_gen_eigs(const Eigen::MatrixXd& A, const Eigen::MatrixXd& X) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(A, X, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// inf-sup constant from the singular values of X^{-1/2} B^T Y^{-1/2}.
inline double dense_infsup(const Eigen::MatrixXd& B, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ex(X), ey(Y);
  const Eigen::MatrixXd Xmh = ex.eigenvectors() * ex.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                              ex.eigenvectors().transpose();
  const Eigen::MatrixXd Ymh = ey.eigenvectors() * ey.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                              ey.eigenvectors().transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xmh * B.transpose() * Ymh);
  return svd.singularValues().minCoeff();
}

}  // namespace oracle
