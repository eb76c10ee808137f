// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"

using namespace rbstokes;
using Catch::Approx;

namespace {
std::shared_ptr<const TruthModel> model_k10() {
  static const auto m = make_channel_model(1, TimeGrid(1.0, 10));
  return m;
}
const InnerProducts& ip_k10() {
  static const InnerProducts ip(model_k10()->spaces);
  return ip;
}

std::vector<BasisRecord> records(std::size_t n, const Parameter& mu, BasisKind kind) {
  std::vector<BasisRecord> r;
  for (std::size_t i = 0; i < n; ++i) r.push_back({mu, static_cast<int>(i), kind});
  return r;
}

// Spaces holding every snapshot of the trajectory at mu plus the supremizers of its pressures.
RBSpacePair snapshot_spaces(const Trajectory& tr) {
  const auto& model = model_k10();
  RBSpacePair s(model);
  std::vector<Eigen::VectorXd> u(tr.velocity.begin() + 1, tr.velocity.end());
  std::vector<Eigen::VectorXd> p(tr.pressure.begin() + 1, tr.pressure.end());
  s.append_basis(p, Field::pressure, records(p.size(), tr.mu, BasisKind::pod_pressure));
  s.append_basis(u, Field::velocity, records(u.size(), tr.mu, BasisKind::pod_velocity));
  std::vector<Eigen::VectorXd> t;
  for (const auto& q : p) t.push_back(supremizer(*model, ip_k10(), tr.mu, q));
  s.append_basis(t, Field::velocity, records(t.size(), tr.mu, BasisKind::supremizer));
  return s;
}

ConstantBounds single_point_constants(const Parameter& mu) {
  static const ConstantOracle o(model_k10());
  return train_constant_bounds(o, {mu}, 1.0).first;
}
}  // namespace

TEST_CASE("appending basis vectors", "[rb]") {
  const auto& model = model_k10();
  const auto mu = make_parameter({1.0, 1.0});
  RBSpacePair s(model);
  const auto& X = model->spaces.X_inner;
  const int n = model->spaces.n_velocity;
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n), b = Eigen::VectorXd::Zero(n);
  a[0] = 1.0;
  b[n / 2] = 1.0;
  b[n / 3] = -0.5;

  auto rep = s.append_basis({a}, Field::velocity, records(1, mu, BasisKind::pod_velocity));
  CHECK(rep.accepted == 1);
  const double na = std::sqrt(a.dot(X * a));
  CHECK((s.velocity_basis().col(0) - a / na).norm() < 1e-14);

  SECTION("vector in the span is rejected") {
    rep = s.append_basis({3.0 * a}, Field::velocity, records(1, mu, BasisKind::pod_velocity));
    CHECK(rep.accepted == 0);
    CHECK(rep.rejected == 1);
    CHECK(s.NX() == 1);
  }
  SECTION("zero vector is rejected") {
    rep = s.append_basis({Eigen::VectorXd::Zero(n)}, Field::velocity, records(1, mu, BasisKind::pod_velocity));
    CHECK(rep.rejected == 1);
  }
  SECTION("orthogonal vector of norm 2 is stored halved") {
    Eigen::VectorXd c = b - a * (a.dot(X * b) / a.dot(X * a));
    c *= 2.0 / std::sqrt(c.dot(X * c));
    rep = s.append_basis({c}, Field::velocity, records(1, mu, BasisKind::pod_velocity));
    CHECK(rep.accepted == 1);
    CHECK((s.velocity_basis().col(1) - c / 2.0).norm() < 1e-12 * c.norm());
  }
  SECTION("gram matrix stays the identity") {
    const auto tr = TruthSolver(model).solve(mu, 0.0);
    std::vector<Eigen::VectorXd> u(tr.velocity.begin() + 1, tr.velocity.end());
    s.append_basis(u, Field::velocity, records(u.size(), mu, BasisKind::pod_velocity));
    const Eigen::MatrixXd& V = s.velocity_basis();
    const Eigen::MatrixXd G = V.transpose() * (X * V);
    CHECK((G - Eigen::MatrixXd::Identity(V.cols(), V.cols())).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(s.velocity_provenance().size() == static_cast<std::size_t>(s.NX()));
  }
  SECTION("provenance must match") {
    CHECK_THROWS_AS(s.append_basis({b}, Field::velocity, {}), UsageError);
  }
}

TEST_CASE("offline compression matches projected truth operators", "[rb]") {
  const auto& model = model_k10();
  const auto mu = make_parameter({0.7, 1.2});
  const auto tr = TruthSolver(model).solve(mu, 0.0);
  const auto spaces = snapshot_spaces(tr);
  const auto db = compress_offline(spaces, single_point_constants(mu), 0.0);
  const auto& V = spaces.velocity_basis();
  const auto& P = spaces.pressure_basis();
  for (const auto& v : {std::vector<double>{1.0, 1.0}, {0.55, 1.45}, {1.3, 0.6}}) {
    const Parameter q = Eigen::Map<const Eigen::VectorXd>(v.data(), 2);
    const auto op = assemble_at(model->ops, q);
    const auto s = reduced_system(db, db.coefficients(q));
    const Eigen::MatrixXd M = V.transpose() * (op.M * V), A = V.transpose() * (op.A * V);
    const Eigen::MatrixXd B = P.transpose() * (op.B * V), C = P.transpose() * (op.C * P);
    CHECK(oracle::rel_frobenius(s.M, M) < 1e-12);
    CHECK(oracle::rel_frobenius(s.A, A) < 1e-12);
    CHECK(oracle::rel_frobenius(s.B, B) < 1e-12);
    CHECK(oracle::rel_frobenius(s.C, C) < 1e-12);
  }

  SECTION("one-dimensional spaces") {
    RBSpacePair one(model);
    one.append_basis({tr.velocity[5]}, Field::velocity, records(1, mu, BasisKind::pod_velocity));
    one.append_basis({tr.pressure[5]}, Field::pressure, records(1, mu, BasisKind::pod_pressure));
    const auto d1 = compress_offline(one, single_point_constants(mu), 0.0);
    const auto op = assemble_at(model->ops, mu);
    const Eigen::VectorXd v = one.velocity_basis().col(0);
    const auto s = reduced_system(d1, d1.coefficients(mu));
    CHECK(s.M(0, 0) == Approx(v.dot(op.M * v)).epsilon(1e-12));
    CHECK(s.A(0, 0) == Approx(v.dot(op.A * v)).epsilon(1e-12));
  }
  SECTION("truncation equals compressing the leading vectors") {
    RBSpacePair lead(model);
    const int nx = 4, ny = 3;
    std::vector<Eigen::VectorXd> vv, pp;
    for (int i = 0; i < nx; ++i) vv.push_back(V.col(i));
    for (int i = 0; i < ny; ++i) pp.push_back(P.col(i));
    lead.append_basis(vv, Field::velocity, records(vv.size(), mu, BasisKind::pod_velocity));
    lead.append_basis(pp, Field::pressure, records(pp.size(), mu, BasisKind::pod_pressure));
    const auto full = compress_offline(lead, single_point_constants(mu), 0.0);
    const auto cut = truncate_database(db, nx, ny);
    const auto a = reduced_system(full, full.coefficients(mu)), b = reduced_system(cut, cut.coefficients(mu));
    CHECK(oracle::rel_frobenius(a.A, b.A) < 1e-10);
    CHECK(oracle::rel_frobenius(a.B, b.B) < 1e-10);
    const auto ta = solve_rb_online(full, mu, 1e-3), tb = solve_rb_online(cut, mu, 1e-3);
    const auto na = residual_norms_online(full, ta, mu, 1e-3), nb = residual_norms_online(cut, tb, mu, 1e-3);
    for (int k = 1; k <= 10; ++k) CHECK(nb.r1[static_cast<std::size_t>(k)] == Approx(na.r1[static_cast<std::size_t>(k)]).epsilon(1e-8));
    CHECK_THROWS_AS(truncate_database(db, db.NX + 1, 1), UsageError);
  }
  SECTION("stale bases are refused") {
    const auto ip = std::make_shared<const InnerProducts>(model->spaces);
    OfflineCompressor comp(model, ip);
    RBSpacePair s2(model);
    s2.append_basis({tr.velocity[3]}, Field::velocity, records(1, mu, BasisKind::pod_velocity));
    comp.update(s2);
    s2.append_basis({tr.velocity[7]}, Field::velocity, records(1, mu, BasisKind::pod_velocity));
    CHECK_THROWS_AS(comp.database(s2, 0.0, single_point_constants(mu)), UsageError);
  }
}

TEST_CASE("reduced solution reproduces a snapshot trajectory", "[rb]") {
  const auto& model = model_k10();
  const auto mu = make_parameter({1.2, 0.8});
  for (double eps : {0.0, 1e-2}) {
    const auto tr = TruthSolver(model).solve(mu, eps);
    const auto spaces = snapshot_spaces(tr);
    const auto db = compress_offline(spaces, single_point_constants(mu), eps);
    const auto rb = solve_rb_online(db, mu, eps);
    const auto rec = reconstruct(rb, spaces.velocity_basis(), spaces.pressure_basis());
    for (int k = 1; k <= 10; ++k) {
      const auto i = static_cast<std::size_t>(k);
      CHECK((rec.velocity[i] - tr.velocity[i]).norm() <= 1e-9 * tr.velocity[i].norm());
      CHECK((rec.pressure[i] - tr.pressure[i]).norm() <= 1e-9 * tr.pressure[i].norm());
    }
    // and the residual vanishes
    const auto n = residual_norms_online(db, rb, mu, eps);
    const auto ref = residual_norms_direct(*model, ip_k10(), tr);
    CHECK(n.r1.back() < 1e-8 * std::max(1.0, ref.r1.back()) + 1e-9);
  }
}

TEST_CASE("galerkin orthogonality of the reduced residual", "[rb]") {
  const auto& model = model_k10();
  const auto mu0 = make_parameter({0.9, 0.9});
  const auto tr = TruthSolver(model).solve(mu0, 0.0);
  RBSpacePair s(model);
  s.append_basis({tr.pressure[4], tr.pressure[9]}, Field::pressure, records(2, mu0, BasisKind::pod_pressure));
  s.append_basis({tr.velocity[4], tr.velocity[9]}, Field::velocity, records(2, mu0, BasisKind::pod_velocity));
  s.append_basis({supremizer(*model, ip_k10(), mu0, s.pressure_basis().col(0)),
                  supremizer(*model, ip_k10(), mu0, s.pressure_basis().col(1))},
                 Field::velocity, records(2, mu0, BasisKind::supremizer));
  const auto mu = make_parameter({1.4, 0.6});
  for (double eps : {0.0, 1e-3}) {
    const auto db = compress_offline(s, single_point_constants(mu0), eps);
    const auto rb = solve_rb_online(db, mu, eps);
    const auto rec = reconstruct(rb, s.velocity_basis(), s.pressure_basis());
    const auto op = assemble_at(model->ops, mu);
    const double dt = model->grid.dt();
    for (std::size_t k = 1; k < rec.velocity.size(); ++k) {
      const Eigen::VectorXd f = model->functionals.f[k], g = model->functionals.g[k];
      const Eigen::VectorXd r1 = f - op.M * (rec.velocity[k] - rec.velocity[k - 1]) / dt - op.A * rec.velocity[k] -
                                 op.B.transpose() * rec.pressure[k];
      const Eigen::VectorXd r2 = g - op.B * rec.velocity[k] + eps * (op.C * rec.pressure[k]);
      CHECK((s.velocity_basis().transpose() * r1).norm() < 1e-10 * std::max(1.0, f.norm()));
      CHECK((s.pressure_basis().transpose() * r2).norm() < 1e-10 * std::max(1.0, g.norm()));
    }
  }
}

TEST_CASE("reduced inf-sup constant", "[rb]") {
  const auto& model = model_k10();
  const auto mu = make_parameter({0.8, 1.3});
  const int np = model->spaces.n_pressure;

  SECTION("vacuous and deficient pairs") {
    CHECK(std::isinf(rb_infsup(Eigen::MatrixXd(0, 3))));
    CHECK(rb_infsup(Eigen::MatrixXd::Ones(3, 2)) == 0.0);
  }
  SECTION("full pressure space with its supremizers gives the truth value") {
    RBSpacePair s(model);
    std::vector<Eigen::VectorXd> q, t;
    for (int i = 0; i < np; ++i) q.push_back(Eigen::VectorXd::Unit(np, i));
    s.append_basis(q, Field::pressure, records(q.size(), mu, BasisKind::pod_pressure));
    for (int i = 0; i < np; ++i) t.push_back(supremizer(*model, ip_k10(), mu, s.pressure_basis().col(i)));
    s.append_basis(t, Field::velocity, records(t.size(), mu, BasisKind::supremizer));
    const auto db = compress_offline(s, single_point_constants(mu), 0.0);
    const auto op = assemble_at(model->ops, mu);
    const double ref = oracle::dense_infsup(Eigen::MatrixXd(op.B), Eigen::MatrixXd(model->spaces.X_inner),
                                            Eigen::MatrixXd(model->spaces.Y_inner));
    CHECK(rb_infsup(db, mu) == Approx(ref).epsilon(1e-8));
  }
  SECTION("velocity orthogonal to the supremizer gives zero") {
    RBSpacePair s(model);
    const auto tr = TruthSolver(model).solve(mu, 0.0);
    s.append_basis({tr.pressure[5]}, Field::pressure, records(1, mu, BasisKind::pod_pressure));
    // X-orthogonal to the supremizer of p means b(v, p) = 0
    const Eigen::VectorXd tq = supremizer(*model, ip_k10(), mu, s.pressure_basis().col(0));
    Eigen::VectorXd v = tr.velocity[5];
    const auto& X = model->spaces.X_inner;
    v -= tq * (tq.dot(X * v) / tq.dot(X * tq));
    s.append_basis({v}, Field::velocity, records(1, mu, BasisKind::pod_velocity));
    const auto db = compress_offline(s, single_point_constants(mu), 0.0);
    CHECK(rb_infsup(db, mu) < 1e-12);
    CHECK_THROWS_AS(solve_rb_online(db, mu, 0.0), InstabilityError);
    // the penalized system stays solvable
    const auto rb = solve_rb_online(db, mu, 1e-2);
    CHECK(rb.u.allFinite());
    CHECK(rb.p.allFinite());
  }
}

TEST_CASE("supremizer operator", "[rb]") {
  const auto& model = model_k10();
  const auto mu = make_parameter({1.1, 0.7});
  const int np = model->spaces.n_pressure;
  const auto& X = model->spaces.X_inner;
  const auto& Y = model->spaces.Y_inner;
  Eigen::VectorXd q1 = Eigen::VectorXd::LinSpaced(np, -1.0, 1.0), q2 = Eigen::VectorXd::Ones(np);
  const Eigen::VectorXd t = supremizer(*model, ip_k10(), mu, 2.0 * q1 - 3.0 * q2);
  const Eigen::VectorXd t1 = supremizer(*model, ip_k10(), mu, q1), t2 = supremizer(*model, ip_k10(), mu, q2);
  CHECK((t - (2.0 * t1 - 3.0 * t2)).norm() < 1e-11 * t.norm());

  static const ConstantOracle o(model_k10());
  const double beta = o.exact_constant(ConstantKind::beta, mu);
  for (const auto& q : {q1, q2, Eigen::VectorXd(q1.cwiseProduct(q1))}) {
    const Eigen::VectorXd tq = supremizer(*model, ip_k10(), mu, q);
    const double ratio = std::sqrt(tq.dot(X * tq)) / std::sqrt(q.dot(Y * q));
    CHECK(ratio >= beta * (1 - 1e-10));
  }
}
