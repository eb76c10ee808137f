// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

#include <Eigen/Dense>

namespace rbstokes::fe {

struct QuadPoint {
  double xi;
  double eta;
  double weight;  // weights sum to the reference-triangle area 1/2
};

// Symmetric 6-point rule on the unit reference triangle, exact for degree 4.
inline const std::array<QuadPoint, 6>& quadrature_p4() {
  static const std::array<QuadPoint, 6> rule = [] {
    constexpr double a = 0.445948490915964886318329253883;
    constexpr double wa = 0.223381589678011465944827780196;
    constexpr double b = 0.091576213509770743459571463402;
    constexpr double wb = 0.109951743655321867638505552471;
    return std::array<QuadPoint, 6>{{{a, a, 0.5 * wa},
                                     {1 - 2 * a, a, 0.5 * wa},
                                     {a, 1 - 2 * a, 0.5 * wa},
                                     {b, b, 0.5 * wb},
                                     {1 - 2 * b, b, 0.5 * wb},
                                     {b, 1 - 2 * b, 0.5 * wb}}};
  }();
  return rule;
}

// Local P2 numbering: vertices 0,1,2 then edge midpoints (0,1), (1,2), (2,0).
constexpr std::array<std::array<int, 2>, 3> kP2Edges{{{0, 1}, {1, 2}, {2, 0}}};

inline std::array<double, 3> barycentric(double xi, double eta) { return {1.0 - xi - eta, xi, eta}; }

inline Eigen::Matrix<double, 6, 1> p2_values(double xi, double eta) {
  const auto l = barycentric(xi, eta);
  Eigen::Matrix<double, 6, 1> v;
  for (int i = 0; i < 3; ++i) v[i] = l[i] * (2.0 * l[i] - 1.0);
  for (int e = 0; e < 3; ++e) v[3 + e] = 4.0 * l[kP2Edges[e][0]] * l[kP2Edges[e][1]];
  return v;
}

// Derivatives with respect to (xi, eta); row i is the gradient of basis function i.
inline Eigen::Matrix<double, 6, 2> p2_gradients(double xi, double eta) {
  const auto l = barycentric(xi, eta);
  const std::array<Eigen::RowVector2d, 3> dl{Eigen::RowVector2d(-1, -1), Eigen::RowVector2d(1, 0),
                                             Eigen::RowVector2d(0, 1)};
  Eigen::Matrix<double, 6, 2> g;
  for (int i = 0; i < 3; ++i) g.row(i) = (4.0 * l[i] - 1.0) * dl[i];
  for (int e = 0; e < 3; ++e) {
    const int i = kP2Edges[e][0], j = kP2Edges[e][1];
    g.row(3 + e) = 4.0 * (l[i] * dl[j] + l[j] * dl[i]);
  }
  return g;
}

inline Eigen::Vector3d p1_values(double xi, double eta) {
  const auto l = barycentric(xi, eta);
  return {l[0], l[1], l[2]};
}

// Element geometry: x = x0 + Jt * (xi, eta).
struct ElementGeometry {
  Eigen::Matrix2d jac;      // columns: x1 - x0, x2 - x0
  Eigen::Matrix2d inv_jac;  // d(xi,eta)/dx
  double area;              // |det jac| / 2

  ElementGeometry(const Eigen::Vector2d& x0, const Eigen::Vector2d& x1, const Eigen::Vector2d& x2) {
    jac << x1 - x0, x2 - x0;
    inv_jac = jac.inverse();
    area = 0.5 * std::abs(jac.determinant());
  }

  // Physical gradients of the P2 basis at a reference point, one row per basis function.
  Eigen::Matrix<double, 6, 2> p2_physical_gradients(double xi, double eta) const {
    return p2_gradients(xi, eta) * inv_jac;
  }
};

}  // namespace rbstokes::fe
