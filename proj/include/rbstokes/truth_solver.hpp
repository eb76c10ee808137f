// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "rbstokes/errors.hpp"
#include "rbstokes/fem_assembly.hpp"
#include "rbstokes/geometry.hpp"

namespace rbstokes {

// Everything the offline stage needs about the truth problem.
struct TruthModel {
  TruthDiscretization spaces;
  AffineOperatorSet ops;
  TimeGrid grid;
  TimeFunctionals functionals;
};

inline std::shared_ptr<const TruthModel> make_truth_model(const ReferenceMesh& mesh,
                                                          std::shared_ptr<const AffineGeometry> geometry,
                                                          const TimeGrid& grid) {
  auto model = std::make_shared<TruthModel>();
  model->spaces = build_truth_spaces(mesh);
  model->ops = assemble_affine_operators(model->spaces, std::move(geometry));
  model->grid = grid;
  model->functionals = assemble_time_functionals(model->ops.rhs, grid);
  return model;
}

inline std::shared_ptr<const TruthModel> make_channel_model(int resolution, const TimeGrid& grid) {
  return make_truth_model(generate_reference_mesh(resolution),
                          std::make_shared<const AffineGeometry>(make_channel_geometry()), grid);
}

struct AssembledOperators {
  SpMat M, A, B, C;
};

inline AssembledOperators assemble_at(const AffineOperatorSet& ops, const Parameter& mu) {
  const auto th = ops.thetas(mu);
  return {ops.m.assemble(th.m), ops.a.assemble(th.a), ops.b.assemble(th.b), ops.c.assemble(th.c)};
}

// Velocity and pressure coefficient vectors for k = 0..K; velocity[0] = 0 and pressure[0] = 0
// (the pressure at k = 0 is not part of the scheme; the slot keeps indices aligned).
struct Trajectory {
  double eps = 0.0;
  Parameter mu;
  std::vector<Eigen::VectorXd> velocity;
  std::vector<Eigen::VectorXd> pressure;

  int K() const { return static_cast<int>(velocity.size()) - 1; }
};

// Saddle block [M/dt + A, B^T; B, -eps C].
inline SpMat saddle_matrix(const AssembledOperators& op, double dt, double eps) {
  const Eigen::Index nu = op.M.rows(), np = op.C.rows();
  Triplets t;
  t.reserve(static_cast<std::size_t>(op.M.nonZeros() + op.A.nonZeros() + 2 * op.B.nonZeros() + op.C.nonZeros()));
  const SpMat U = (1.0 / dt) * op.M + op.A;
  for (Eigen::Index c = 0; c < U.outerSize(); ++c)
    for (SpMat::InnerIterator it(U, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index c = 0; c < op.B.outerSize(); ++c) {
    for (SpMat::InnerIterator it(op.B, c); it; ++it) {
      t.emplace_back(nu + it.row(), it.col(), it.value());
      t.emplace_back(it.col(), nu + it.row(), it.value());
    }
  }
  if (eps != 0.0) {
    for (Eigen::Index c = 0; c < op.C.outerSize(); ++c)
      for (SpMat::InnerIterator it(op.C, c); it; ++it) t.emplace_back(nu + it.row(), nu + it.col(), -eps * it.value());
  }
  SpMat K(nu + np, nu + np);
  K.setFromTriplets(t.begin(), t.end());
  K.makeCompressed();
  return K;
}

class TruthSolver {
 public:
  explicit TruthSolver(std::shared_ptr<const TruthModel> model) : model_(std::move(model)) {}

  const TruthModel& model() const { return *model_; }

  Trajectory solve(const Parameter& mu, double eps) const { return solve_with(mu, eps, true, std::nullopt); }

  // with_data = false drops f and g; `initial` replaces the zero initial velocity.
  Trajectory solve_with(const Parameter& mu, double eps, bool with_data,
                        const std::optional<Eigen::VectorXd>& initial) const {
    if (!(eps >= 0.0)) throw ConfigError("penalty parameter must be >= 0");
    const auto& m = *model_;
    const auto op = assemble_at(m.ops, mu);
    const double dt = m.grid.dt();
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(saddle_matrix(op, dt, eps));
    if (lu.info() != Eigen::Success)
      throw NumericalError("truth saddle system is singular at mu=(" + format_parameter(mu) + "), eps=" +
                           std::to_string(eps) + ": " + lu.lastErrorMessage());
    const int nu = m.spaces.n_velocity, np = m.spaces.n_pressure;
    Trajectory tr;
    tr.eps = eps;
    tr.mu = mu;
    tr.velocity.push_back(initial ? *initial : Eigen::VectorXd::Zero(nu));
    tr.pressure.push_back(Eigen::VectorXd::Zero(np));
    const SpMat Mdt = (1.0 / dt) * op.M;
    Eigen::VectorXd rhs(nu + np);
    for (int k = 1; k <= m.grid.K; ++k) {
      rhs.head(nu) = Mdt * tr.velocity.back();
      if (with_data) {
        rhs.head(nu) += m.functionals.f[static_cast<std::size_t>(k)];
        rhs.tail(np) = m.functionals.g[static_cast<std::size_t>(k)];
      } else {
        rhs.tail(np).setZero();
      }
      Eigen::VectorXd x = lu.solve(rhs);
      if (!x.allFinite()) throw NumericalError("non-finite truth solution at step " + std::to_string(k));
      tr.velocity.push_back(x.head(nu));
      tr.pressure.push_back(x.tail(np));
    }
    return tr;
  }

 private:
  std::shared_ptr<const TruthModel> model_;
};

// Per-k spatial norms and the spatio-temporal energy norms built from them:
//   l2_X[k]^2 = |v^k|_mu^2 + dt sum_{j<=k} |v^j|_{X,mu}^2
//   l2_Z[k]^2 = l2_X[k]^2 + dt sum_{j<=k} eps |q^j|_{Y,mu}^2
// The dt-sums (cumulative_*) are nondecreasing in k.
struct EnergyReport {
  double eps = 0.0;
  std::vector<double> mu_norm;  // sqrt(v^T M v)
  std::vector<double> x_norm;   // sqrt(v^T A v)
  std::vector<double> y_norm;   // sqrt(q^T C q)
  std::vector<double> cumulative_x;
  std::vector<double> cumulative_z;
  std::vector<double> l2_X;
  std::vector<double> l2_Z;
};

inline EnergyReport energy_norms(const std::vector<Eigen::VectorXd>& velocity,
                                 const std::vector<Eigen::VectorXd>& pressure, double eps,
                                 const AssembledOperators& op, double dt, int up_to_k) {
  if (up_to_k < 0 || up_to_k >= static_cast<int>(velocity.size()) || pressure.size() != velocity.size())
    throw UsageError("energy_norms: trajectory shorter than requested k");
  EnergyReport r;
  r.eps = eps;
  double sx = 0.0, sz = 0.0;
  for (int k = 0; k <= up_to_k; ++k) {
    const auto& v = velocity[static_cast<std::size_t>(k)];
    const auto& q = pressure[static_cast<std::size_t>(k)];
    const double mv = std::max(0.0, v.dot(op.M * v));
    const double av = std::max(0.0, v.dot(op.A * v));
    const double cq = std::max(0.0, q.dot(op.C * q));
    if (k >= 1) {
      sx += dt * av;
      sz += dt * (av + eps * cq);
    }
    r.mu_norm.push_back(std::sqrt(mv));
    r.x_norm.push_back(std::sqrt(av));
    r.y_norm.push_back(std::sqrt(cq));
    r.cumulative_x.push_back(sx);
    r.cumulative_z.push_back(sz);
    r.l2_X.push_back(std::sqrt(mv + sx));
    r.l2_Z.push_back(std::sqrt(mv + sz));
  }
  return r;
}

inline EnergyReport energy_norms(const Trajectory& tr, const AffineOperatorSet& ops, double dt, int up_to_k) {
  return energy_norms(tr.velocity, tr.pressure, tr.eps, assemble_at(ops, tr.mu), dt, up_to_k);
}

struct TrajectoryError {
  std::vector<Eigen::VectorXd> velocity;
  std::vector<Eigen::VectorXd> pressure;
};

inline TrajectoryError trajectory_error(const Trajectory& truth, const Trajectory& approx) {
  if (truth.velocity.size() != approx.velocity.size() || truth.pressure.size() != approx.pressure.size())
    throw UsageError("trajectory_error: mismatched time grids");
  if (truth.mu.size() != approx.mu.size() || truth.mu != approx.mu || truth.eps != approx.eps)
    throw UsageError("trajectory_error: trajectories belong to different (mu, eps)");
  TrajectoryError e;
  for (std::size_t k = 0; k < truth.velocity.size(); ++k) {
    if (truth.velocity[k].size() != approx.velocity[k].size() || truth.pressure[k].size() != approx.pressure[k].size())
      throw UsageError("trajectory_error: mismatched space dimensions");
    e.velocity.push_back(truth.velocity[k] - approx.velocity[k]);
    e.pressure.push_back(truth.pressure[k] - approx.pressure[k]);
  }
  return e;
}

}  // namespace rbstokes
