// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbstokes/errors.hpp"
#include "rbstokes/rb_core.hpp"
#include "rbstokes/stability_constants.hpp"

namespace rbstokes {

// Riesz representer w of a functional r in X (or Y): W w = r, dual norm sqrt(w^T W w).
struct RieszResult {
  Eigen::VectorXd representer;
  double dual_norm = 0.0;
};

inline RieszResult riesz_representer(const InnerProducts& ip, const Eigen::VectorXd& r, Field which) {
  RieszResult out;
  const bool vel = which == Field::velocity;
  out.representer = vel ? ip.solve_x(r) : ip.solve_y(r);
  const SpMat& W = vel ? ip.X : ip.Y;
  out.dual_norm = std::sqrt(std::max(0.0, out.representer.dot(W * out.representer)));
  return out;
}

// Dual norms of the two residuals per time level (index 0 unused, kept 0).
struct ResidualNorms {
  std::vector<double> r1, r2;
  int K() const { return static_cast<int>(r1.size()) - 1; }
};

// Online residual dual norms. Each residual is an affine combination of stored representer
// coordinates; the norm is the Euclidean length of that combination, so no cancellation
// between large squared terms occurs.
//   r1^k = f^k - M_N (u^k - u^{k-1}) / dt - A_N u^k - B_N^T p^k
//   r2^k = g^k - B_N u^k + eps C_N p^k
inline ResidualNorms residual_norms_online(const RBDatabase& db, const ReducedTrajectory& tr,
                                           const std::vector<SubdomainCoefficients>& coeffs, double eps) {
  const int K = tr.K();
  const Eigen::Index nx = db.NX, ny = db.NY;
  if (tr.u.rows() != nx || tr.p.rows() != ny) throw UsageError("residual_norms_online: trajectory/database mismatch");
  const double dt = db.grid.dt();
  const auto& R = db.res;
  const Eigen::VectorXd tm = db.op.m.theta_values(coeffs), ta = db.op.a.theta_values(coeffs),
                        tb = db.op.b.theta_values(coeffs), tc = db.op.c.theta_values(coeffs);

  const Eigen::Index r1 = R.r1_F.rows(), r2 = R.r2_G.rows();
  Eigen::MatrixXd C1(r1, 2 + 2 * nx + ny);
  C1.col(0) = -R.r1_F.col(0);
  C1.col(1) = -R.r1_F.col(1);
  auto combine = [](Eigen::Ref<Eigen::MatrixXd> dst, const std::vector<Eigen::MatrixXd>& blocks,
                    const Eigen::VectorXd& theta, double scale) {
    dst.setZero();
    for (std::size_t q = 0; q < blocks.size(); ++q) dst.noalias() += (scale * theta[static_cast<Eigen::Index>(q)]) * blocks[q];
  };
  combine(C1.middleCols(2, nx), R.r1_m, tm, -1.0 / dt);
  combine(C1.middleCols(2 + nx, nx), R.r1_a, ta, -1.0);
  combine(C1.middleCols(2 + 2 * nx, ny), R.r1_bt, tb, -1.0);

  Eigen::MatrixXd C2(r2, 1 + nx + ny);
  C2.col(0) = R.r2_G.col(0);
  combine(C2.middleCols(1, nx), R.r2_b, tb, -1.0);
  combine(C2.middleCols(1 + nx, ny), R.r2_c, tc, eps);

  Eigen::MatrixXd W1(2 + 2 * nx + ny, K), W2(1 + nx + ny, K);
  for (int k = 1; k <= K; ++k) {
    const double t = db.grid.t(k);
    const double h = inflow_amplitude(t);
    W1(0, k - 1) = inflow_amplitude_derivative(t);
    W1(1, k - 1) = h;
    W1.col(k - 1).segment(2, nx) = tr.u.col(k) - tr.u.col(k - 1);
    W1.col(k - 1).segment(2 + nx, nx) = tr.u.col(k);
    W1.col(k - 1).segment(2 + 2 * nx, ny) = tr.p.col(k);
    W2(0, k - 1) = h;
    W2.col(k - 1).segment(1, nx) = tr.u.col(k);
    W2.col(k - 1).segment(1 + nx, ny) = tr.p.col(k);
  }
  const Eigen::MatrixXd E1 = C1 * W1, E2 = C2 * W2;
  ResidualNorms out;
  out.r1.assign(static_cast<std::size_t>(K + 1), 0.0);
  out.r2.assign(static_cast<std::size_t>(K + 1), 0.0);
  for (int k = 1; k <= K; ++k) {
    out.r1[static_cast<std::size_t>(k)] = E1.col(k - 1).norm();
    out.r2[static_cast<std::size_t>(k)] = E2.col(k - 1).norm();
  }
  return out;
}

inline ResidualNorms residual_norms_online(const RBDatabase& db, const ReducedTrajectory& tr, const Parameter& mu,
                                           double eps) {
  return residual_norms_online(db, tr, db.coefficients(mu), eps);
}

// Truth-side residual dual norms of an arbitrary (truth-space) trajectory.
inline ResidualNorms residual_norms_direct(const TruthModel& model, const InnerProducts& ip, const Trajectory& tr) {
  const auto op = assemble_at(model.ops, tr.mu);
  const double dt = model.grid.dt();
  ResidualNorms out;
  out.r1.assign(tr.velocity.size(), 0.0);
  out.r2.assign(tr.velocity.size(), 0.0);
  for (std::size_t k = 1; k < tr.velocity.size(); ++k) {
    const Eigen::VectorXd r1 = model.functionals.f[k] - op.M * (tr.velocity[k] - tr.velocity[k - 1]) / dt -
                               op.A * tr.velocity[k] - op.B.transpose() * tr.pressure[k];
    const Eigen::VectorXd r2 = model.functionals.g[k] - op.B * tr.velocity[k] + tr.eps * (op.C * tr.pressure[k]);
    out.r1[k] = riesz_representer(ip, r1, Field::velocity).dual_norm;
    out.r2[k] = riesz_representer(ip, r2, Field::pressure).dual_norm;
  }
  return out;
}

enum class BoundKind { nonsym, sym, penalty };

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::nonsym: return "nonsym";
    case BoundKind::sym: return "sym";
    case BoundKind::penalty: return "penalty";
  }
  return "?";
}

inline BoundKind parse_bound_kind(const std::string& s) {
  if (s == "nonsym") return BoundKind::nonsym;
  if (s == "sym") return BoundKind::sym;
  if (s == "penalty") return BoundKind::penalty;
  throw UsageError("unknown bound kind '" + s + "' (expected sym, nonsym or penalty)");
}

// values[k] for k = 0..up_to_k; values[0] = 0.
struct BoundSeries {
  BoundKind kind = BoundKind::sym;
  std::vector<double> values;
  BoundConstants constants;
  double eps = 0.0;
  std::string constants_mode() const { return constants.label(); }
};

namespace detail {
inline void check_range(const ResidualNorms& n, int up_to_k) {
  if (up_to_k < 0 || up_to_k > n.K()) throw UsageError("bound requested beyond the residual series");
}
}  // namespace detail

inline BoundSeries bound_nonsym(const ResidualNorms& n, const BoundConstants& c, double dt, int up_to_k) {
  detail::check_range(n, up_to_k);
  if (!(c.alpha_a_lb > 0.0) || !(c.beta_lb > 0.0)) throw UsageError("nonsym bound needs alpha_a_lb > 0 and beta_lb > 0");
  BoundSeries out{BoundKind::nonsym, {0.0}, c, 0.0};
  const double cross = (2.0 / c.beta_lb) * (1.0 + c.gamma_a_ub / c.alpha_a_lb);
  const double w2 = (c.gamma_m_ub / dt + c.gamma_a_ub * c.gamma_a_ub / c.alpha_a_lb) / (c.beta_lb * c.beta_lb);
  double s = 0.0;
  for (int k = 1; k <= up_to_k; ++k) {
    const double a = n.r1[static_cast<std::size_t>(k)], b = n.r2[static_cast<std::size_t>(k)];
    s += dt * (a * a / c.alpha_a_lb + cross * a * b + w2 * b * b);
    out.values.push_back(std::sqrt(s));
  }
  return out;
}

inline BoundSeries bound_sym(const ResidualNorms& n, const BoundConstants& c, double dt, int up_to_k) {
  detail::check_range(n, up_to_k);
  if (!(c.alpha_a_lb > 0.0) || !(c.beta_lb > 0.0)) throw UsageError("sym bound needs alpha_a_lb > 0 and beta_lb > 0");
  BoundSeries out{BoundKind::sym, {0.0}, c, 0.0};
  const double cross = (2.0 / c.beta_lb) * (1.0 + std::sqrt(c.gamma_a_ub / c.alpha_a_lb));
  const double w2 = (c.gamma_m_ub / dt + c.gamma_a_ub) / (c.beta_lb * c.beta_lb);
  double s = 0.0;
  for (int k = 1; k <= up_to_k; ++k) {
    const double a = n.r1[static_cast<std::size_t>(k)], b = n.r2[static_cast<std::size_t>(k)];
    s += dt * (a * a / c.alpha_a_lb + cross * a * b + w2 * b * b);
    out.values.push_back(std::sqrt(s));
  }
  return out;
}

inline BoundSeries bound_penalty(const ResidualNorms& n, const BoundConstants& c, double dt, double eps,
                                 int up_to_k) {
  detail::check_range(n, up_to_k);
  if (!(eps > 0.0)) throw UsageError("penalty bound needs eps > 0");
  if (!(c.alpha_a_lb > 0.0) || !(c.alpha_c_lb > 0.0))
    throw UsageError("penalty bound needs alpha_a_lb > 0 and alpha_c_lb > 0");
  BoundSeries out{BoundKind::penalty, {0.0}, c, eps};
  double s = 0.0;
  for (int k = 1; k <= up_to_k; ++k) {
    const double a = n.r1[static_cast<std::size_t>(k)], b = n.r2[static_cast<std::size_t>(k)];
    s += dt * (a * a / c.alpha_a_lb + b * b / (eps * c.alpha_c_lb));
    out.values.push_back(std::sqrt(s));
  }
  return out;
}

inline BoundSeries compute_bound(BoundKind kind, const ResidualNorms& n, const BoundConstants& c, double dt,
                                 double eps, int up_to_k) {
  switch (kind) {
    case BoundKind::nonsym: return bound_nonsym(n, c, dt, up_to_k);
    case BoundKind::sym: return bound_sym(n, c, dt, up_to_k);
    case BoundKind::penalty: return bound_penalty(n, c, dt, eps, up_to_k);
  }
  throw UsageError("unknown bound kind");
}

// bound / error; a zero error gives +inf for a positive bound and 1 when the bound is 0 too.
inline double effectivity(double bound, double error) {
  if (error > 0.0) return bound / error;
  return bound > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

}  // namespace rbstokes
