// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rbstokes/errors.hpp"
#include "rbstokes/fe.hpp"
#include "rbstokes/geometry.hpp"
#include "rbstokes/parameter.hpp"

namespace rbstokes {

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

// Layout of the truth spaces. Full velocity index = component * n_nodes + P2 node; the
// solver works on the free (non-Dirichlet) subset. Pressure is P1 on mesh vertices.
struct TruthDiscretization {
  ReferenceMesh mesh;
  int n_nodes = 0;  // P2 nodes: vertices first, then edges
  std::vector<Eigen::Vector2d> node_coords;
  std::vector<std::array<int, 6>> element_nodes;
  std::vector<int> full_to_free;  // -1 for Dirichlet
  std::vector<int> free_to_full;
  std::vector<int> dirichlet_dofs;  // full indices, ascending
  int n_velocity = 0;
  int n_pressure = 0;
  SpMat X_inner;          // reference H1 inner product on free dofs
  SpMat Y_inner;          // L2 inner product on P1
  Eigen::VectorXd lifting;  // full-length velocity interpolant of u_L

  int n_full_velocity() const { return 2 * n_nodes; }
  int n_total() const { return n_velocity + n_pressure; }

  Eigen::VectorXd expand_velocity(const Eigen::VectorXd& free) const {
    Eigen::VectorXd full = Eigen::VectorXd::Zero(n_full_velocity());
    for (int i = 0; i < n_velocity; ++i) full[free_to_full[static_cast<std::size_t>(i)]] = free[i];
    return full;
  }
  Eigen::VectorXd restrict_velocity(const Eigen::VectorXd& full) const {
    Eigen::VectorXd free(n_velocity);
    for (int i = 0; i < n_velocity; ++i) free[i] = full[free_to_full[static_cast<std::size_t>(i)]];
    return free;
  }
};

// Lifting cut-off: chi(0) = 1, chi(lift_end) = 0, linear in between.
inline Eigen::Vector2d lifting_function(const Eigen::Vector2d& x, double lift_end = channel::kLiftEnd) {
  const double chi = std::max(0.0, 1.0 - x.x() / lift_end);
  return {4.0 * x.y() * (1.0 - x.y()) * chi, 0.0};
}

// Removes the roundoff asymmetry left by triplet summation order.
inline SpMat exact_symmetric(const SpMat& A) {
  SpMat S = SpMat(A.transpose()) + A;
  S *= 0.5;
  S.makeCompressed();
  return S;
}

namespace detail {

struct ElementLocal {
  Eigen::Matrix<double, 6, 6> mass;
  std::array<std::array<Eigen::Matrix<double, 6, 6>, 2>, 2> stiff;  // stiff[k][l](a,b) = int d_k phi_a d_l phi_b
  std::array<Eigen::Matrix<double, 3, 6>, 2> div;                    // div[j](c,a) = int psi_c d_j phi_a
  Eigen::Matrix3d pmass;
};

inline ElementLocal element_local(const Eigen::Vector2d& x0, const Eigen::Vector2d& x1, const Eigen::Vector2d& x2) {
  fe::ElementGeometry geo(x0, x1, x2);
  const double detj = 2.0 * geo.area;
  ElementLocal el;
  el.mass.setZero();
  el.pmass.setZero();
  for (auto& row : el.stiff)
    for (auto& m : row) m.setZero();
  for (auto& m : el.div) m.setZero();
  for (const auto& qp : fe::quadrature_p4()) {
    const double w = qp.weight * detj;
    const auto phi = fe::p2_values(qp.xi, qp.eta);
    const auto grad = geo.p2_physical_gradients(qp.xi, qp.eta);
    const auto psi = fe::p1_values(qp.xi, qp.eta);
    el.mass.noalias() += w * phi * phi.transpose();
    el.pmass.noalias() += w * psi * psi.transpose();
    for (int k = 0; k < 2; ++k) {
      for (int l = 0; l < 2; ++l) el.stiff[k][l].noalias() += w * grad.col(k) * grad.col(l).transpose();
      el.div[k].noalias() += w * psi * grad.col(k).transpose();
    }
  }
  return el;
}

}  // namespace detail

inline TruthDiscretization build_truth_spaces(const ReferenceMesh& mesh) {
  TruthDiscretization sp;
  sp.mesh = mesh;
  const int nv = static_cast<int>(mesh.vertices.size());
  sp.n_pressure = nv;

  std::map<std::pair<int, int>, int> edge_node;
  sp.node_coords.assign(mesh.vertices.begin(), mesh.vertices.end());
  int next = nv;
  for (const auto& tri : mesh.triangles) {
    for (const auto& e : fe::kP2Edges) {
      auto key = std::minmax(tri[e[0]], tri[e[1]]);
      if (edge_node.emplace(key, next).second) {
        sp.node_coords.push_back(0.5 * (mesh.vertices[key.first] + mesh.vertices[key.second]));
        ++next;
      }
    }
  }
  sp.n_nodes = next;
  for (const auto& tri : mesh.triangles) {
    std::array<int, 6> nodes{tri[0], tri[1], tri[2], 0, 0, 0};
    for (int e = 0; e < 3; ++e) nodes[3 + e] = edge_node.at(std::minmax(tri[fe::kP2Edges[e][0]], tri[fe::kP2Edges[e][1]]));
    sp.element_nodes.push_back(nodes);
  }

  std::vector<char> constrained(static_cast<std::size_t>(sp.n_nodes), 0);
  for (const auto& be : mesh.boundary) {
    if (be.tag == BoundaryTag::outflow) continue;
    constrained[static_cast<std::size_t>(be.a)] = 1;
    constrained[static_cast<std::size_t>(be.b)] = 1;
    constrained[static_cast<std::size_t>(edge_node.at(std::minmax(be.a, be.b)))] = 1;
  }
  sp.full_to_free.assign(static_cast<std::size_t>(2 * sp.n_nodes), -1);
  for (int comp = 0; comp < 2; ++comp) {
    for (int n = 0; n < sp.n_nodes; ++n) {
      const int full = comp * sp.n_nodes + n;
      if (constrained[static_cast<std::size_t>(n)]) {
        sp.dirichlet_dofs.push_back(full);
      } else {
        sp.full_to_free[static_cast<std::size_t>(full)] = static_cast<int>(sp.free_to_full.size());
        sp.free_to_full.push_back(full);
      }
    }
  }
  sp.n_velocity = static_cast<int>(sp.free_to_full.size());

  Triplets xt, yt;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const auto el = detail::element_local(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    const auto& nodes = sp.element_nodes[t];
    const Eigen::Matrix<double, 6, 6> h1 = el.mass + el.stiff[0][0] + el.stiff[1][1];
    for (int comp = 0; comp < 2; ++comp) {
      for (int a = 0; a < 6; ++a) {
        const int ia = sp.full_to_free[static_cast<std::size_t>(comp * sp.n_nodes + nodes[a])];
        if (ia < 0) continue;
        for (int b = 0; b < 6; ++b) {
          const int ib = sp.full_to_free[static_cast<std::size_t>(comp * sp.n_nodes + nodes[b])];
          if (ib >= 0) xt.emplace_back(ia, ib, h1(a, b));
        }
      }
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) yt.emplace_back(tri[a], tri[b], el.pmass(a, b));
  }
  sp.X_inner.resize(sp.n_velocity, sp.n_velocity);
  sp.X_inner.setFromTriplets(xt.begin(), xt.end());
  sp.X_inner = exact_symmetric(sp.X_inner);
  sp.Y_inner.resize(sp.n_pressure, sp.n_pressure);
  sp.Y_inner.setFromTriplets(yt.begin(), yt.end());
  sp.Y_inner = exact_symmetric(sp.Y_inner);

  sp.lifting = Eigen::VectorXd::Zero(2 * sp.n_nodes);
  for (int n = 0; n < sp.n_nodes; ++n) {
    const Eigen::Vector2d u = lifting_function(sp.node_coords[static_cast<std::size_t>(n)]);
    sp.lifting[n] = u.x();
    sp.lifting[sp.n_nodes + n] = u.y();
  }
  return sp;
}

// ---------------------------------------------------------------------------------------------
// Affine coefficient functions.

enum class ThetaKind : int { det = 0, G = 1, D = 2 };

// theta = |det J_s| (det), or entry (r, c) of G_s = |det J_s| J_s^{-1} J_s^{-T} (G),
// or of D_s = |det J_s| J_s^{-1} (D); J_s is the reference-to-physical Jacobian.
struct ThetaRef {
  int subdomain = 0;
  ThetaKind kind = ThetaKind::det;
  int r = 0;
  int c = 0;
};

struct SubdomainCoefficients {
  double abs_det = 1.0;
  Eigen::Matrix2d G = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d D = Eigen::Matrix2d::Identity();
};

inline std::vector<SubdomainCoefficients> subdomain_coefficients(const std::vector<SubdomainMap>& maps) {
  std::vector<SubdomainCoefficients> out;
  out.reserve(maps.size());
  for (const auto& m : maps) {
    SubdomainCoefficients c;
    c.abs_det = m.abs_det();
    const Eigen::Matrix2d inv = m.matrix.inverse();
    c.D = c.abs_det * inv;
    c.G = c.abs_det * inv * inv.transpose();
    c.G(1, 0) = c.G(0, 1);
    out.push_back(c);
  }
  return out;
}

inline double evaluate_theta(const ThetaRef& t, const std::vector<SubdomainCoefficients>& coeffs) {
  const auto& c = coeffs[static_cast<std::size_t>(t.subdomain)];
  switch (t.kind) {
    case ThetaKind::det: return c.abs_det;
    case ThetaKind::G: return c.G(t.r, t.c);
    case ThetaKind::D: return c.D(t.r, t.c);
  }
  return 0.0;
}

// One coefficient: a linear combination of primitive coefficient functions.
struct Theta {
  std::vector<std::pair<double, ThetaRef>> terms;
  double operator()(const std::vector<SubdomainCoefficients>& c) const {
    double s = 0.0;
    for (const auto& [w, ref] : terms) s += w * evaluate_theta(ref, c);
    return s;
  }
};

struct AffineForm {
  std::string name;
  std::vector<SpMat> matrices;
  std::vector<Theta> thetas;
  int raw_terms = 0;  // term count before merging linearly dependent coefficients

  std::size_t size() const { return matrices.size(); }

  Eigen::VectorXd theta_values(const std::vector<SubdomainCoefficients>& c) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(thetas.size()));
    for (std::size_t q = 0; q < thetas.size(); ++q) v[static_cast<Eigen::Index>(q)] = thetas[q](c);
    return v;
  }

  SpMat assemble(const Eigen::VectorXd& theta) const {
    SpMat out = theta[0] * matrices[0];
    for (std::size_t q = 1; q < matrices.size(); ++q) out += theta[static_cast<Eigen::Index>(q)] * matrices[q];
    return out;
  }
};

struct ThetaValues {
  Eigen::VectorXd m, a, b, c;
};

// Right-hand side data: f^k = -H'(t_k) F1 - H(t_k) F2, g^k = H(t_k) G.
struct RhsData {
  Eigen::VectorXd F1;  // int u_L . v
  Eigen::VectorXd F2;  // int grad u_L : grad v
  Eigen::VectorXd G;   // int q div u_L
};

struct AffineOperatorSet {
  std::shared_ptr<const AffineGeometry> geometry;
  AffineForm m, a, b, c;  // b maps velocity (columns) to pressure (rows)
  RhsData rhs;

  ThetaValues thetas(const Parameter& mu) const {
    const auto coeffs = subdomain_coefficients(geometry->evaluate_affine_maps(mu));
    return {m.theta_values(coeffs), a.theta_values(coeffs), b.theta_values(coeffs), c.theta_values(coeffs)};
  }
  const AffineForm& form(char which) const {
    switch (which) {
      case 'm': return m;
      case 'a': return a;
      case 'b': return b;
      case 'c': return c;
    }
    throw UsageError(std::string("unknown form '") + which + "'");
  }
};

// Merges terms whose coefficient functions are linearly dependent on earlier ones, judged on a
// fixed random sample of the parameter domain. Kept coefficients stay unchanged; each dropped
// term's matrix is folded into the kept matrices with its expansion weights.
inline AffineForm compact_affine_form(const AffineForm& raw, const AffineGeometry& geometry, bool symmetric,
                                      std::size_t samples = 64, std::uint64_t seed = 20240607ULL) {
  const auto pts = geometry.domain().random_sample(samples, seed);
  const Eigen::Index Q = static_cast<Eigen::Index>(raw.size());
  Eigen::MatrixXd S(static_cast<Eigen::Index>(pts.size()), Q);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    S.row(static_cast<Eigen::Index>(i)) =
        raw.theta_values(subdomain_coefficients(geometry.evaluate_affine_maps(pts[i]))).transpose();
  }
  std::vector<Eigen::Index> kept;
  std::vector<std::pair<Eigen::Index, Eigen::VectorXd>> folded;
  for (Eigen::Index q = 0; q < Q; ++q) {
    const Eigen::VectorXd col = S.col(q);
    if (!kept.empty()) {
      Eigen::MatrixXd K(S.rows(), static_cast<Eigen::Index>(kept.size()));
      for (std::size_t i = 0; i < kept.size(); ++i) K.col(static_cast<Eigen::Index>(i)) = S.col(kept[i]);
      const Eigen::VectorXd w = K.colPivHouseholderQr().solve(col);
      const double res = (K * w - col).norm();
      if (res <= 1e-11 * std::max(1.0, col.norm())) {
        folded.emplace_back(q, w);
        continue;
      }
    }
    kept.push_back(q);
  }
  AffineForm out;
  out.name = raw.name;
  out.raw_terms = static_cast<int>(Q);
  for (Eigen::Index q : kept) {
    out.matrices.push_back(raw.matrices[static_cast<std::size_t>(q)]);
    out.thetas.push_back(raw.thetas[static_cast<std::size_t>(q)]);
  }
  for (const auto& [q, w] : folded) {
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (w[i] != 0.0) out.matrices[static_cast<std::size_t>(i)] += w[i] * raw.matrices[static_cast<std::size_t>(q)];
    }
  }
  for (auto& M : out.matrices) M = symmetric ? exact_symmetric(M) : SpMat(M);
  for (auto& M : out.matrices) M.makeCompressed();
  return out;
}

// Per-subdomain affine terms: m and c carry |det J|, a carries the pullback tensor G
// (entries 11, 22 and, for non-diagonal maps, 12), b carries D_{ji} for the term -int q d_j v_i.
inline AffineOperatorSet assemble_affine_operators(const TruthDiscretization& sp,
                                                   std::shared_ptr<const AffineGeometry> geometry,
                                                   bool compact = true) {
  const auto& mesh = sp.mesh;
  const int S = geometry->num_subdomains();
  if (mesh.num_subdomains != S) throw UsageError("mesh and geometry disagree on the subdomain count");
  const int nu = sp.n_velocity, np = sp.n_pressure, nn = sp.n_nodes;

  std::vector<Triplets> tm(static_cast<std::size_t>(S)), tc(static_cast<std::size_t>(S));
  std::vector<std::array<Triplets, 3>> ta(static_cast<std::size_t>(S));         // 11, 22, 12+21
  std::vector<std::array<Triplets, 4>> tb(static_cast<std::size_t>(S));         // (i, j) -> 2*i + j
  std::vector<int> count(static_cast<std::size_t>(S), 0);

  Eigen::VectorXd F1 = Eigen::VectorXd::Zero(2 * nn), F2 = Eigen::VectorXd::Zero(2 * nn);
  Eigen::VectorXd G = Eigen::VectorXd::Zero(np);

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    const int s = mesh.subdomain_of[t];
    ++count[static_cast<std::size_t>(s)];
    const auto el = detail::element_local(mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    const auto& nodes = sp.element_nodes[t];
    const std::array<Eigen::Matrix<double, 6, 6>, 3> ak{el.stiff[0][0], el.stiff[1][1],
                                                        el.stiff[0][1] + el.stiff[1][0]};
    Eigen::Matrix<double, 6, 1> ul[2];
    for (int comp = 0; comp < 2; ++comp)
      for (int a = 0; a < 6; ++a) ul[comp][a] = sp.lifting[comp * nn + nodes[a]];
    const Eigen::Matrix<double, 6, 6> lap = el.stiff[0][0] + el.stiff[1][1];
    for (int comp = 0; comp < 2; ++comp) {
      const Eigen::Matrix<double, 6, 1> fm = el.mass * ul[comp], fk = lap * ul[comp];
      for (int a = 0; a < 6; ++a) {
        F1[comp * nn + nodes[a]] += fm[a];
        F2[comp * nn + nodes[a]] += fk[a];
      }
      const Eigen::Vector3d g = el.div[comp] * ul[comp];
      for (int c = 0; c < 3; ++c) G[tri[c]] += g[c];
    }

    for (int comp = 0; comp < 2; ++comp) {
      for (int a = 0; a < 6; ++a) {
        const int ia = sp.full_to_free[static_cast<std::size_t>(comp * nn + nodes[a])];
        if (ia < 0) continue;
        for (int b = 0; b < 6; ++b) {
          const int ib = sp.full_to_free[static_cast<std::size_t>(comp * nn + nodes[b])];
          if (ib < 0) continue;
          tm[static_cast<std::size_t>(s)].emplace_back(ia, ib, el.mass(a, b));
          for (int k = 0; k < 3; ++k) ta[static_cast<std::size_t>(s)][static_cast<std::size_t>(k)].emplace_back(ia, ib, ak[static_cast<std::size_t>(k)](a, b));
        }
        for (int j = 0; j < 2; ++j)
          for (int c = 0; c < 3; ++c)
            tb[static_cast<std::size_t>(s)][static_cast<std::size_t>(2 * comp + j)].emplace_back(tri[c], ia, -el.div[j](c, a));
      }
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) tc[static_cast<std::size_t>(s)].emplace_back(tri[a], tri[b], el.pmass(a, b));
  }

  auto make = [](int rows, int cols, const Triplets& t) {
    SpMat M(rows, cols);
    M.setFromTriplets(t.begin(), t.end());
    if (rows == cols) return exact_symmetric(M);
    M.makeCompressed();
    return M;
  };
  auto single = [](int s, ThetaKind k, int r, int c) {
    Theta th;
    th.terms.emplace_back(1.0, ThetaRef{s, k, r, c});
    return th;
  };

  AffineForm m, a, b, c;
  m.name = "m";
  a.name = "a";
  b.name = "b";
  c.name = "c";
  for (int s = 0; s < S; ++s) {
    const auto us = static_cast<std::size_t>(s);
    if (count[us] == 0) continue;
    const bool diag = geometry->is_diagonal(s);
    m.matrices.push_back(make(nu, nu, tm[us]));
    m.thetas.push_back(single(s, ThetaKind::det, 0, 0));
    c.matrices.push_back(make(np, np, tc[us]));
    c.thetas.push_back(single(s, ThetaKind::det, 0, 0));
    a.matrices.push_back(make(nu, nu, ta[us][0]));
    a.thetas.push_back(single(s, ThetaKind::G, 0, 0));
    a.matrices.push_back(make(nu, nu, ta[us][1]));
    a.thetas.push_back(single(s, ThetaKind::G, 1, 1));
    if (!diag) {
      a.matrices.push_back(make(nu, nu, ta[us][2]));
      a.thetas.push_back(single(s, ThetaKind::G, 0, 1));
    }
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        if (diag && i != j) continue;
        b.matrices.push_back(make(np, nu, tb[us][static_cast<std::size_t>(2 * i + j)]));
        b.thetas.push_back(single(s, ThetaKind::D, j, i));
      }
    }
  }
  for (AffineForm* f : {&m, &a, &b, &c}) f->raw_terms = static_cast<int>(f->size());

  AffineOperatorSet ops;
  ops.geometry = geometry;
  if (compact) {
    ops.m = compact_affine_form(m, *geometry, true);
    ops.a = compact_affine_form(a, *geometry, true);
    ops.b = compact_affine_form(b, *geometry, false);
    ops.c = compact_affine_form(c, *geometry, true);
  } else {
    ops.m = std::move(m);
    ops.a = std::move(a);
    ops.b = std::move(b);
    ops.c = std::move(c);
  }
  ops.rhs.F1 = sp.restrict_velocity(F1);
  ops.rhs.F2 = sp.restrict_velocity(F2);
  ops.rhs.G = G;
  return ops;
}

// ---------------------------------------------------------------------------------------------
// Time discretization and time-dependent data.

struct TimeGrid {
  double T = 1.0;
  int K = 100;

  TimeGrid() = default;
  TimeGrid(double T_, int K_) : T(T_), K(K_) {
    if (!(T > 0.0) || K < 1) throw ConfigError("time grid needs T > 0 and K >= 1");
  }
  double dt() const { return T / K; }
  double t(int k) const { return T * static_cast<double>(k) / K; }
};

inline double inflow_amplitude(double t) { return t * (std::sin(2.0 * M_PI * t) + 1.0); }
inline double inflow_amplitude_derivative(double t) {
  return std::sin(2.0 * M_PI * t) + 1.0 + 2.0 * M_PI * t * std::cos(2.0 * M_PI * t);
}

struct TimeFunctionals {
  std::vector<Eigen::VectorXd> f;  // k = 0..K, free velocity dofs
  std::vector<Eigen::VectorXd> g;  // k = 0..K
};

inline TimeFunctionals assemble_time_functionals(const RhsData& rhs, const TimeGrid& grid) {
  TimeFunctionals tf;
  for (int k = 0; k <= grid.K; ++k) {
    const double t = grid.t(k);
    tf.f.push_back(-inflow_amplitude_derivative(t) * rhs.F1 - inflow_amplitude(t) * rhs.F2);
    tf.g.push_back(inflow_amplitude(t) * rhs.G);
  }
  return tf;
}

}  // namespace rbstokes
