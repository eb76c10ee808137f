// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "rbstokes/errors.hpp"
#include "rbstokes/fem_assembly.hpp"
#include "rbstokes/stability_constants.hpp"
#include "rbstokes/truth_solver.hpp"

namespace rbstokes {

// Factorized truth inner products, shared by supremizers and Riesz representers.
class InnerProducts {
 public:
  explicit InnerProducts(const TruthDiscretization& sp) : X(sp.X_inner), Y(sp.Y_inner) {
    x_chol.compute(X);
    y_chol.compute(Y);
    if (x_chol.info() != Eigen::Success || y_chol.info() != Eigen::Success)
      throw NumericalError("inner-product matrices are not positive definite");
  }
  Eigen::VectorXd solve_x(const Eigen::VectorXd& r) const { return x_chol.solve(r); }
  Eigen::VectorXd solve_y(const Eigen::VectorXd& r) const { return y_chol.solve(r); }

  SpMat X, Y;
  Eigen::SimplicialLDLT<SpMat> x_chol, y_chol;
};

enum class BasisKind : std::uint8_t { pod_velocity = 0, pod_pressure = 1, supremizer = 2 };

inline const char* to_string(BasisKind k) {
  switch (k) {
    case BasisKind::pod_velocity: return "pod_velocity";
    case BasisKind::pod_pressure: return "pod_pressure";
    case BasisKind::supremizer: return "supremizer";
  }
  return "?";
}

struct BasisRecord {
  Parameter mu;
  int index = 0;  // POD rank, or time index for supremizers
  BasisKind kind = BasisKind::pod_velocity;
};

enum class Field { velocity, pressure };

struct AppendReport {
  int accepted = 0;
  int rejected = 0;
  std::vector<std::string> notices;
};

// Nested pair (X_N, Y_N): X-orthonormal velocity basis, Y-orthonormal pressure basis.
class RBSpacePair {
 public:
  // post-orthogonalization norm below this fraction of the input norm rejects a vector
  static constexpr double kRejectTolerance = 1e-10;

  explicit RBSpacePair(std::shared_ptr<const TruthModel> model)
      : model_(std::move(model)),
        V_(model_->spaces.n_velocity, 0),
        P_(model_->spaces.n_pressure, 0),
        XV_(model_->spaces.n_velocity, 0),
        YP_(model_->spaces.n_pressure, 0) {}

  const TruthModel& model() const { return *model_; }
  std::shared_ptr<const TruthModel> model_ptr() const { return model_; }
  int NX() const { return static_cast<int>(V_.cols()); }
  int NY() const { return static_cast<int>(P_.cols()); }
  const Eigen::MatrixXd& velocity_basis() const { return V_; }
  const Eigen::MatrixXd& pressure_basis() const { return P_; }
  const std::vector<BasisRecord>& velocity_provenance() const { return vprov_; }
  const std::vector<BasisRecord>& pressure_provenance() const { return pprov_; }
  std::uint64_t version() const { return version_; }

  AppendReport append_basis(const std::vector<Eigen::VectorXd>& vectors, Field which,
                            const std::vector<BasisRecord>& records) {
    if (records.size() != vectors.size()) throw UsageError("append_basis: one provenance record per vector");
    const bool vel = which == Field::velocity;
    const SpMat& W = vel ? model_->spaces.X_inner : model_->spaces.Y_inner;
    Eigen::MatrixXd& B = vel ? V_ : P_;
    Eigen::MatrixXd& WB = vel ? XV_ : YP_;
    auto& prov = vel ? vprov_ : pprov_;
    AppendReport rep;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
      Eigen::VectorXd v = vectors[i];
      if (v.size() != W.rows()) throw UsageError("append_basis: vector is not in the truth space");
      const double n0 = std::sqrt(std::max(0.0, v.dot(W * v)));
      if (!(n0 > 0.0) || !std::isfinite(n0)) {
        ++rep.rejected;
        rep.notices.push_back("rejected zero vector " + std::to_string(i));
        continue;
      }
      for (int pass = 0; pass < 2; ++pass) v.noalias() -= B * (WB.transpose() * v);
      const Eigen::VectorXd Wv = W * v;
      const double n1 = std::sqrt(std::max(0.0, v.dot(Wv)));
      if (n1 < kRejectTolerance * n0) {
        ++rep.rejected;
        rep.notices.push_back("rejected vector " + std::to_string(i) + " (in span, relative residual " +
                              std::to_string(n1 / n0) + ")");
        continue;
      }
      B.conservativeResize(Eigen::NoChange, B.cols() + 1);
      WB.conservativeResize(Eigen::NoChange, WB.cols() + 1);
      B.col(B.cols() - 1) = v / n1;
      WB.col(WB.cols() - 1) = Wv / n1;
      prov.push_back(records[i]);
      ++rep.accepted;
    }
    if (rep.accepted > 0) ++version_;
    return rep;
  }

  // Coefficients of the orthogonal projection onto X_N (or Y_N).
  Eigen::VectorXd project(const Eigen::VectorXd& v, Field which) const {
    return which == Field::velocity ? Eigen::VectorXd(XV_.transpose() * v) : Eigen::VectorXd(YP_.transpose() * v);
  }
  Eigen::VectorXd projection_error(const Eigen::VectorXd& v, Field which) const {
    return which == Field::velocity ? Eigen::VectorXd(v - V_ * project(v, which))
                                    : Eigen::VectorXd(v - P_ * project(v, which));
  }

 private:
  std::shared_ptr<const TruthModel> model_;
  Eigen::MatrixXd V_, P_, XV_, YP_;
  std::vector<BasisRecord> vprov_, pprov_;
  std::uint64_t version_ = 0;
};

// Supremizer: X t = B(mu)^T q.
inline Eigen::VectorXd supremizer(const TruthModel& model, const InnerProducts& ip, const Parameter& mu,
                                  const Eigen::VectorXd& q) {
  const auto th = model.ops.thetas(mu);
  return ip.solve_x(model.ops.b.assemble(th.b).transpose() * q);
}

// ---------------------------------------------------------------------------------------------
// Reduced database.

struct ReducedForm {
  std::vector<Theta> thetas;
  std::vector<Eigen::MatrixXd> q;  // projected affine matrices

  Eigen::MatrixXd assemble(const Eigen::VectorXd& theta) const {
    Eigen::MatrixXd out = theta[0] * q[0];
    for (std::size_t i = 1; i < q.size(); ++i) out += theta[static_cast<Eigen::Index>(i)] * q[i];
    return out;
  }
  Eigen::VectorXd theta_values(const std::vector<SubdomainCoefficients>& c) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(thetas.size()));
    for (std::size_t i = 0; i < thetas.size(); ++i) v[static_cast<Eigen::Index>(i)] = thetas[i](c);
    return v;
  }
};

// Residual representers in orthonormal coordinates: the Riesz representer of every affine
// residual term t is Q s_t for a fixed orthonormal Q, so dual norms of combinations are
// Euclidean norms of combined s columns. Column blocks:
//   r1: F (2 cols: F1, F2), m[q] (N_X), a[q] (N_X), bt[q] (N_Y)
//   r2: G (1 col), b[q] (N_X), c[q] (N_Y)
struct ResidualData {
  Eigen::MatrixXd r1_F;
  std::vector<Eigen::MatrixXd> r1_m, r1_a, r1_bt;
  Eigen::MatrixXd r2_G;
  std::vector<Eigen::MatrixXd> r2_b, r2_c;
};

struct ReducedOperators {
  ReducedForm m, a, b, c;
  Eigen::MatrixXd F1, F2;  // N_X x 1
  Eigen::MatrixXd G;       // N_Y x 1
};

struct RBDatabase {
  static constexpr int kSchemaVersion = 1;

  int NX = 0, NY = 0;
  double eps = 0.0;  // training penalty parameter
  TimeGrid grid;
  std::string geometry_name = "channel";
  Eigen::VectorXd domain_lower, domain_upper;
  std::uint64_t mesh_digest = 0;
  int truth_velocity_dofs = 0, truth_pressure_dofs = 0;
  std::uint64_t basis_version = 0;
  ReducedOperators op;
  ResidualData res;
  ConstantBounds constants;
  std::shared_ptr<const AffineGeometry> geometry;
  // optional truth bases (only for reconstruction)
  Eigen::MatrixXd velocity_basis, pressure_basis;

  std::vector<SubdomainCoefficients> coefficients(const Parameter& mu) const {
    return subdomain_coefficients(geometry->evaluate_affine_maps(mu));
  }
  std::array<std::size_t, 4> q_counts() const { return {op.m.q.size(), op.a.q.size(), op.b.q.size(), op.c.q.size()}; }
};

// Restricts a database to the leading (nx, ny) basis vectors, which is the database the
// greedy had after that stage since the bases are nested.
inline RBDatabase truncate_database(const RBDatabase& db, int nx, int ny) {
  if (nx > db.NX || ny > db.NY || nx < 0 || ny < 0) throw UsageError("truncate_database: sizes exceed the database");
  RBDatabase out = db;
  out.NX = nx;
  out.NY = ny;
  auto sq = [](ReducedForm& f, int r, int c) {
    for (auto& m : f.q) m = Eigen::MatrixXd(m.topLeftCorner(r, c));
  };
  sq(out.op.m, nx, nx);
  sq(out.op.a, nx, nx);
  sq(out.op.b, ny, nx);
  sq(out.op.c, ny, ny);
  out.op.F1 = Eigen::MatrixXd(db.op.F1.topRows(nx));
  out.op.F2 = Eigen::MatrixXd(db.op.F2.topRows(nx));
  out.op.G = Eigen::MatrixXd(db.op.G.topRows(ny));
  for (auto& m : out.res.r1_m) m = Eigen::MatrixXd(m.leftCols(nx));
  for (auto& m : out.res.r1_a) m = Eigen::MatrixXd(m.leftCols(nx));
  for (auto& m : out.res.r1_bt) m = Eigen::MatrixXd(m.leftCols(ny));
  for (auto& m : out.res.r2_b) m = Eigen::MatrixXd(m.leftCols(nx));
  for (auto& m : out.res.r2_c) m = Eigen::MatrixXd(m.leftCols(ny));
  if (db.velocity_basis.cols() > 0) out.velocity_basis = Eigen::MatrixXd(db.velocity_basis.leftCols(nx));
  if (db.pressure_basis.cols() > 0) out.pressure_basis = Eigen::MatrixXd(db.pressure_basis.leftCols(ny));
  return out;
}

// Incrementally maintained orthonormal basis of Riesz representers in one truth space.
class RepresenterBasis {
 public:
  RepresenterBasis(const SpMat* W, Eigen::Index n) : W_(W), Q_(n, 0) {}

  // Returns the coordinates of z in the (possibly extended) basis.
  Eigen::VectorXd add(const Eigen::VectorXd& z) {
    const Eigen::Index r = Q_.cols();
    Eigen::VectorXd s = Eigen::VectorXd::Zero(r + 1);
    Eigen::VectorXd v = z;
    const double n0 = std::sqrt(std::max(0.0, z.dot(*W_ * z)));
    for (int pass = 0; pass < 2; ++pass) {
      if (r == 0) break;
      const Eigen::VectorXd c = WQ_.transpose() * v;
      v.noalias() -= Q_ * c;
      s.head(r) += c;
    }
    const Eigen::VectorXd Wv = *W_ * v;
    const double nv = std::sqrt(std::max(0.0, v.dot(Wv)));
    if (nv > 1e-13 * n0 && nv > 0.0) {
      Q_.conservativeResize(Eigen::NoChange, r + 1);
      WQ_.conservativeResize(Q_.rows(), r + 1);
      Q_.col(r) = v / nv;
      WQ_.col(r) = Wv / nv;
      s[r] = nv;
      return s;
    }
    return s.head(r);
  }
  Eigen::Index rank() const { return Q_.cols(); }

 private:
  const SpMat* W_;
  Eigen::MatrixXd Q_, WQ_;
};

// Offline stage: projects all affine terms onto the current bases and keeps the residual
// representer data up to date as the bases grow (append-only).
class OfflineCompressor {
 public:
  OfflineCompressor(std::shared_ptr<const TruthModel> model, std::shared_ptr<const InnerProducts> ip)
      : model_(std::move(model)),
        ip_(std::move(ip)),
        x_basis_(&model_->spaces.X_inner, model_->spaces.n_velocity),
        y_basis_(&model_->spaces.Y_inner, model_->spaces.n_pressure) {
    const auto& ops = model_->ops;
    r1_F_.push_back(x_basis_.add(ip_->solve_x(ops.rhs.F1)));
    r1_F_.push_back(x_basis_.add(ip_->solve_x(ops.rhs.F2)));
    r2_G_.push_back(y_basis_.add(ip_->solve_y(ops.rhs.G)));
    r1_m_.resize(ops.m.size());
    r1_a_.resize(ops.a.size());
    r1_bt_.resize(ops.b.size());
    r2_b_.resize(ops.b.size());
    r2_c_.resize(ops.c.size());
  }

  const InnerProducts& inner_products() const { return *ip_; }

  // Adds representers for basis vectors appended since the last call.
  void update(const RBSpacePair& spaces) {
    const auto& ops = model_->ops;
    const auto& V = spaces.velocity_basis();
    const auto& P = spaces.pressure_basis();
    // chronological interleaving does not matter for the norms; velocity first for determinism
    for (int i = nx_; i < V.cols(); ++i) {
      const Eigen::VectorXd v = V.col(i);
      for (std::size_t q = 0; q < ops.m.size(); ++q) r1_m_[q].push_back(x_basis_.add(ip_->solve_x(ops.m.matrices[q] * v)));
      for (std::size_t q = 0; q < ops.a.size(); ++q) r1_a_[q].push_back(x_basis_.add(ip_->solve_x(ops.a.matrices[q] * v)));
      for (std::size_t q = 0; q < ops.b.size(); ++q) r2_b_[q].push_back(y_basis_.add(ip_->solve_y(ops.b.matrices[q] * v)));
    }
    for (int j = ny_; j < P.cols(); ++j) {
      const Eigen::VectorXd p = P.col(j);
      for (std::size_t q = 0; q < ops.b.size(); ++q)
        r1_bt_[q].push_back(x_basis_.add(ip_->solve_x(ops.b.matrices[q].transpose() * p)));
      for (std::size_t q = 0; q < ops.c.size(); ++q) r2_c_[q].push_back(y_basis_.add(ip_->solve_y(ops.c.matrices[q] * p)));
    }
    nx_ = static_cast<int>(V.cols());
    ny_ = static_cast<int>(P.cols());
    version_ = spaces.version();
  }

  RBDatabase database(const RBSpacePair& spaces, double eps, const ConstantBounds& constants,
                      bool with_basis = false) const {
    if (spaces.version() != version_ || spaces.NX() != nx_ || spaces.NY() != ny_)
      throw UsageError("database requested for bases that changed after the last update");
    if (nx_ == 0 && ny_ == 0) throw UsageError("compress_offline needs nonempty bases");
    const auto& m = *model_;
    const auto& V = spaces.velocity_basis();
    const auto& P = spaces.pressure_basis();
    RBDatabase db;
    db.NX = nx_;
    db.NY = ny_;
    db.eps = eps;
    db.grid = m.grid;
    db.geometry = m.ops.geometry;
    db.domain_lower = m.ops.geometry->domain().lower();
    db.domain_upper = m.ops.geometry->domain().upper();
    db.mesh_digest = mesh_digest(m.spaces.mesh);
    db.truth_velocity_dofs = m.spaces.n_velocity;
    db.truth_pressure_dofs = m.spaces.n_pressure;
    db.basis_version = version_;
    db.constants = constants;
    auto project = [](const AffineForm& f, const Eigen::MatrixXd& L, const Eigen::MatrixXd& R) {
      ReducedForm out;
      out.thetas = f.thetas;
      for (const auto& A : f.matrices) out.q.push_back(L.transpose() * (A * R));
      return out;
    };
    db.op.m = project(m.ops.m, V, V);
    db.op.a = project(m.ops.a, V, V);
    db.op.b = project(m.ops.b, P, V);
    db.op.c = project(m.ops.c, P, P);
    db.op.F1 = V.transpose() * m.ops.rhs.F1;
    db.op.F2 = V.transpose() * m.ops.rhs.F2;
    db.op.G = P.transpose() * m.ops.rhs.G;

    const Eigen::Index r1 = x_basis_.rank(), r2 = y_basis_.rank();
    auto block = [](const std::vector<Eigen::VectorXd>& cols, Eigen::Index rows) {
      Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)).head(cols[i].size()) = cols[i];
      return out;
    };
    db.res.r1_F = block(r1_F_, r1);
    db.res.r2_G = block(r2_G_, r2);
    for (const auto& c : r1_m_) db.res.r1_m.push_back(block(c, r1));
    for (const auto& c : r1_a_) db.res.r1_a.push_back(block(c, r1));
    for (const auto& c : r1_bt_) db.res.r1_bt.push_back(block(c, r1));
    for (const auto& c : r2_b_) db.res.r2_b.push_back(block(c, r2));
    for (const auto& c : r2_c_) db.res.r2_c.push_back(block(c, r2));
    if (with_basis) {
      db.velocity_basis = V;
      db.pressure_basis = P;
    }
    return db;
  }

 private:
  std::shared_ptr<const TruthModel> model_;
  std::shared_ptr<const InnerProducts> ip_;
  RepresenterBasis x_basis_, y_basis_;
  std::vector<Eigen::VectorXd> r1_F_, r2_G_;
  std::vector<std::vector<Eigen::VectorXd>> r1_m_, r1_a_, r1_bt_, r2_b_, r2_c_;
  int nx_ = 0, ny_ = 0;
  std::uint64_t version_ = 0;
};

inline RBDatabase compress_offline(const RBSpacePair& spaces, const ConstantBounds& constants, double eps,
                                   bool with_basis = false) {
  OfflineCompressor comp(spaces.model_ptr(), std::make_shared<const InnerProducts>(spaces.model().spaces));
  comp.update(spaces);
  return comp.database(spaces, eps, constants, with_basis);
}

// ---------------------------------------------------------------------------------------------
// Online stage.

struct ReducedSystem {
  Eigen::MatrixXd M, A, B, C;  // at mu
};

inline ReducedSystem reduced_system(const RBDatabase& db, const std::vector<SubdomainCoefficients>& coeffs) {
  ReducedSystem s;
  s.M = db.op.m.assemble(db.op.m.theta_values(coeffs));
  s.A = db.op.a.assemble(db.op.a.theta_values(coeffs));
  s.B = db.op.b.assemble(db.op.b.theta_values(coeffs));
  s.C = db.op.c.assemble(db.op.c.theta_values(coeffs));
  return s;
}

inline Eigen::MatrixXd reduced_block_matrix(const ReducedSystem& s, double dt, double eps) {
  const Eigen::Index nx = s.M.rows(), ny = s.C.rows();
  Eigen::MatrixXd K(nx + ny, nx + ny);
  K.topLeftCorner(nx, nx) = s.M / dt + s.A;
  K.topRightCorner(nx, ny) = s.B.transpose();
  K.bottomLeftCorner(ny, nx) = s.B;
  K.bottomRightCorner(ny, ny) = -eps * s.C;
  return K;
}

// Reduced coefficients for k = 0..K as matrix columns.
struct ReducedTrajectory {
  Parameter mu;
  double eps = 0.0;
  Eigen::MatrixXd u;  // N_X x (K+1)
  Eigen::MatrixXd p;  // N_Y x (K+1)
  int K() const { return static_cast<int>(u.cols()) - 1; }
};

// Inf-sup constant of the reduced pair; with orthonormal bases it is the smallest singular
// value of B_N. Empty Y_N gives +inf (vacuous infimum); N_X < N_Y gives 0.
inline double rb_infsup(const Eigen::MatrixXd& BN) {
  if (BN.rows() == 0) return std::numeric_limits<double>::infinity();
  if (BN.cols() < BN.rows()) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(BN);
  return svd.singularValues()[BN.rows() - 1];
}

inline double rb_infsup(const RBDatabase& db, const Parameter& mu) {
  const auto c = db.coefficients(mu);
  return rb_infsup(db.op.b.assemble(db.op.b.theta_values(c)));
}

inline ReducedTrajectory solve_rb_online(const RBDatabase& db, const ReducedSystem& s, const Parameter& mu,
                                         double eps) {
  if (!(eps >= 0.0)) throw ConfigError("penalty parameter must be >= 0");
  const int K = db.grid.K;
  const double dt = db.grid.dt();
  const Eigen::Index nx = db.NX, ny = db.NY;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(reduced_block_matrix(s, dt, eps));
  ReducedTrajectory tr;
  tr.mu = mu;
  tr.eps = eps;
  tr.u = Eigen::MatrixXd::Zero(nx, K + 1);
  tr.p = Eigen::MatrixXd::Zero(ny, K + 1);
  if (nx + ny == 0) return tr;
  // for eps > 0 the reduced system is always uniquely solvable, only eps = 0 can break down
  const double rc = lu.rcond();
  if (eps == 0.0 && !(rc > 1e-14)) {
    const double bn = rb_infsup(s.B);
    throw InstabilityError("reduced saddle system is singular at mu=(" + format_parameter(mu) +
                               "), eps=" + std::to_string(eps) + ": beta_N=" + std::to_string(bn) +
                               ", rcond=" + std::to_string(rc),
                           bn);
  }
  const Eigen::MatrixXd Mdt = s.M / dt;
  Eigen::VectorXd rhs(nx + ny);
  for (int k = 1; k <= K; ++k) {
    const double t = db.grid.t(k);
    rhs.head(nx) = Mdt * tr.u.col(k - 1) - inflow_amplitude_derivative(t) * db.op.F1.col(0) -
                   inflow_amplitude(t) * db.op.F2.col(0);
    rhs.tail(ny) = inflow_amplitude(t) * db.op.G.col(0);
    const Eigen::VectorXd x = lu.solve(rhs);
    tr.u.col(k) = x.head(nx);
    tr.p.col(k) = x.tail(ny);
  }
  if (!tr.u.allFinite() || !tr.p.allFinite()) throw NumericalError("non-finite reduced solution");
  return tr;
}

inline ReducedTrajectory solve_rb_online(const RBDatabase& db, const Parameter& mu, double eps) {
  db.geometry->domain().require(mu);
  return solve_rb_online(db, reduced_system(db, db.coefficients(mu)), mu, eps);
}

// Truth-space reconstruction of a reduced trajectory.
inline Trajectory reconstruct(const ReducedTrajectory& r, const Eigen::MatrixXd& V, const Eigen::MatrixXd& P) {
  Trajectory tr;
  tr.mu = r.mu;
  tr.eps = r.eps;
  for (int k = 0; k <= r.K(); ++k) {
    tr.velocity.push_back(V.leftCols(r.u.rows()) * r.u.col(k));
    tr.pressure.push_back(P.leftCols(r.p.rows()) * r.p.col(k));
  }
  return tr;
}

// Energy norms of a reduced trajectory from the reduced operators (same definitions as
// energy_norms on the truth side).
inline EnergyReport reduced_energy_norms(const ReducedTrajectory& r, const ReducedSystem& s, double dt, double eps) {
  EnergyReport rep;
  rep.eps = eps;
  double sx = 0.0, sz = 0.0;
  const Eigen::MatrixXd Mu = s.M * r.u, Au = s.A * r.u, Cp = s.C * r.p;
  for (int k = 0; k <= r.K(); ++k) {
    const double mv = std::max(0.0, r.u.col(k).dot(Mu.col(k)));
    const double av = std::max(0.0, r.u.col(k).dot(Au.col(k)));
    const double cq = std::max(0.0, r.p.col(k).dot(Cp.col(k)));
    if (k >= 1) {
      sx += dt * av;
      sz += dt * (av + eps * cq);
    }
    rep.mu_norm.push_back(std::sqrt(mv));
    rep.x_norm.push_back(std::sqrt(av));
    rep.y_norm.push_back(std::sqrt(cq));
    rep.cumulative_x.push_back(sx);
    rep.cumulative_z.push_back(sz);
    rep.l2_X.push_back(std::sqrt(mv + sx));
    rep.l2_Z.push_back(std::sqrt(mv + sz));
  }
  return rep;
}

}  // namespace rbstokes
