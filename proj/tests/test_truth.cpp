// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"

using namespace rbstokes;
using Catch::Approx;

namespace {
std::shared_ptr<const TruthModel> small_model(int K = 10) { return make_channel_model(1, TimeGrid(1.0, K)); }
}  // namespace

TEST_CASE("zero data gives the zero trajectory", "[truth]") {
  const auto model = small_model();
  TruthSolver solver(model);
  const auto tr = solver.solve_with(make_parameter({0.8, 1.1}), 0.0, false, std::nullopt);
  REQUIRE(tr.velocity.size() == 11);
  REQUIRE(tr.pressure.size() == 11);
  for (std::size_t k = 0; k < tr.velocity.size(); ++k) {
    CHECK(tr.velocity[k].norm() == 0.0);
    CHECK(tr.pressure[k].norm() == 0.0);
  }
}

TEST_CASE("single step matches a dense block solve", "[truth]") {
  const auto model = small_model(1);
  TruthSolver solver(model);
  for (double eps : {0.0, 1e-3}) {
    const auto mu = make_parameter({1.3, 0.7});
    const auto tr = solver.solve(mu, eps);
    const auto d = oracle::direct_assembly(model->spaces, *model->ops.geometry, mu);
    const int nu = model->spaces.n_velocity, np = model->spaces.n_pressure;
    const double dt = model->grid.dt();
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nu + np, nu + np);
    K.topLeftCorner(nu, nu) = d.M / dt + d.A;
    K.topRightCorner(nu, np) = d.B.transpose();
    K.bottomLeftCorner(np, nu) = d.B;
    K.bottomRightCorner(np, np) = -eps * d.C;
    Eigen::VectorXd rhs(nu + np);
    rhs << model->functionals.f[1], model->functionals.g[1];
    const Eigen::VectorXd x = K.fullPivLu().solve(rhs);
    Eigen::VectorXd y(nu + np);
    y << tr.velocity[1], tr.pressure[1];
    CHECK((x - y).norm() / x.norm() < 1e-10);
  }
}

TEST_CASE("incompressibility holds exactly at eps = 0", "[truth]") {
  const auto model = small_model();
  TruthSolver solver(model);
  const auto mu = make_parameter({0.6, 1.4});
  const auto tr = solver.solve(mu, 0.0);
  const auto op = assemble_at(model->ops, mu);
  for (int k = 1; k <= model->grid.K; ++k) {
    const auto& g = model->functionals.g[static_cast<std::size_t>(k)];
    const Eigen::VectorXd r = op.B * tr.velocity[static_cast<std::size_t>(k)] - g;
    CHECK(r.cwiseAbs().maxCoeff() < 1e-10 * g.norm());
  }
}

TEST_CASE("repeated solves are bitwise identical", "[truth]") {
  const auto model = small_model();
  TruthSolver solver(model);
  const auto mu = make_parameter({1.1, 0.9});
  const auto a = solver.solve(mu, 1e-3), b = solver.solve(mu, 1e-3);
  for (std::size_t k = 0; k < a.velocity.size(); ++k) {
    CHECK(a.velocity[k] == b.velocity[k]);
    CHECK(a.pressure[k] == b.pressure[k]);
  }
}

TEST_CASE("penalty solution converges at first order", "[truth]") {
  const auto model = make_channel_model(2, TimeGrid(1.0, 20));
  TruthSolver solver(model);
  const auto mu = make_parameter({0.9, 1.2});
  const auto u0 = solver.solve(mu, 0.0).velocity.back();
  auto dist = [&](double eps) {
    const Eigen::VectorXd d = solver.solve(mu, eps).velocity.back() - u0;
    return std::sqrt(d.dot(model->spaces.X_inner * d));
  };
  const double d1 = dist(1e-3), d2 = dist(5e-4);
  CHECK(d1 / d2 >= 1.5);
  CHECK(d1 / d2 <= 2.5);
  CHECK(dist(1e-5) < d2);
}

TEST_CASE("backward Euler is energy stable", "[truth]") {
  const auto model = small_model(20);
  TruthSolver solver(model);
  SplitMix64 rng(3);
  Eigen::VectorXd u0(model->spaces.n_velocity);
  for (int i = 0; i < u0.size(); ++i) u0[i] = rng.uniform() - 0.5;
  const auto mu = make_parameter({0.7, 0.8});
  const auto op = assemble_at(model->ops, mu);
  for (double eps : {0.0, 1e-2}) {
    const auto tr = solver.solve_with(mu, eps, false, u0);
    double prev = std::sqrt(u0.dot(op.M * u0));
    for (int k = 1; k <= model->grid.K; ++k) {
      const auto& u = tr.velocity[static_cast<std::size_t>(k)];
      const double cur = std::sqrt(u.dot(op.M * u));
      CHECK(cur <= prev * (1.0 + 1e-13));
      prev = cur;
    }
    CHECK(prev > 0.0);
  }
}

TEST_CASE("energy norms", "[truth]") {
  const auto model = small_model(4);
  const auto mu = make_parameter({1.2, 1.2});
  const auto op = assemble_at(model->ops, mu);
  const int nu = model->spaces.n_velocity, np = model->spaces.n_pressure;

  SECTION("zero trajectory") {
    std::vector<Eigen::VectorXd> v(5, Eigen::VectorXd::Zero(nu)), q(5, Eigen::VectorXd::Zero(np));
    const auto r = energy_norms(v, q, 0.1, op, 0.25, 4);
    for (int k = 0; k <= 4; ++k) {
      CHECK(r.l2_X[static_cast<std::size_t>(k)] == 0.0);
      CHECK(r.l2_Z[static_cast<std::size_t>(k)] == 0.0);
    }
  }
  SECTION("single step with dt = 1") {
    SplitMix64 rng(1);
    Eigen::VectorXd v(nu);
    for (int i = 0; i < nu; ++i) v[i] = rng.uniform();
    std::vector<Eigen::VectorXd> vel{Eigen::VectorXd::Zero(nu), v}, pre(2, Eigen::VectorXd::Zero(np));
    const auto r = energy_norms(vel, pre, 0.0, op, 1.0, 1);
    CHECK(r.l2_X[1] == Approx(std::sqrt(v.dot(op.M * v) + v.dot(op.A * v))).epsilon(1e-14));
  }
  SECTION("eps = 0 ignores pressure; cumulative parts are monotone") {
    TruthSolver solver(model);
    const auto tr = solver.solve(mu, 1e-2);
    const auto r0 = energy_norms(tr.velocity, tr.pressure, 0.0, op, model->grid.dt(), 4);
    const auto r1 = energy_norms(tr.velocity, tr.pressure, 1e-2, op, model->grid.dt(), 4);
    for (int k = 0; k <= 4; ++k) {
      CHECK(r0.l2_Z[static_cast<std::size_t>(k)] == r0.l2_X[static_cast<std::size_t>(k)]);
      CHECK(r1.l2_Z[static_cast<std::size_t>(k)] >= r1.l2_X[static_cast<std::size_t>(k)]);
      if (k > 0) {
        CHECK(r1.cumulative_x[static_cast<std::size_t>(k)] >= r1.cumulative_x[static_cast<std::size_t>(k - 1)]);
        CHECK(r1.cumulative_z[static_cast<std::size_t>(k)] >= r1.cumulative_z[static_cast<std::size_t>(k - 1)]);
      }
    }
  }
}

TEST_CASE("trajectory errors", "[truth]") {
  const auto model = small_model(5);
  TruthSolver solver(model);
  const auto mu = make_parameter({0.9, 0.6});
  const auto truth = solver.solve(mu, 0.0);

  const auto same = trajectory_error(truth, truth);
  for (const auto& e : same.velocity) CHECK(e.norm() == 0.0);

  Trajectory zero = truth;
  for (auto& v : zero.velocity) v.setZero();
  for (auto& p : zero.pressure) p.setZero();
  const auto full = trajectory_error(truth, zero);
  for (std::size_t k = 0; k < truth.velocity.size(); ++k) CHECK(full.velocity[k] == truth.velocity[k]);
  CHECK(full.velocity[0].norm() == 0.0);

  Trajectory shorter = truth;
  shorter.velocity.pop_back();
  shorter.pressure.pop_back();
  CHECK_THROWS_AS(trajectory_error(truth, shorter), UsageError);

  // error equations against an arbitrary approximation
  SplitMix64 rng(4);
  Trajectory approx = truth;
  for (std::size_t k = 1; k < approx.velocity.size(); ++k) {
    for (int i = 0; i < approx.velocity[k].size(); ++i) approx.velocity[k][i] += 0.1 * (rng.uniform() - 0.5);
    for (int i = 0; i < approx.pressure[k].size(); ++i) approx.pressure[k][i] += rng.uniform() - 0.5;
  }
  const auto err = trajectory_error(truth, approx);
  const auto op = assemble_at(model->ops, mu);
  const double dt = model->grid.dt();
  for (int j = 1; j <= model->grid.K; ++j) {
    const auto uj = static_cast<std::size_t>(j);
    const Eigen::VectorXd r1 = model->functionals.f[uj] - op.M * (approx.velocity[uj] - approx.velocity[uj - 1]) / dt -
                               op.A * approx.velocity[uj] - op.B.transpose() * approx.pressure[uj];
    const Eigen::VectorXd lhs = op.M * (err.velocity[uj] - err.velocity[uj - 1]) / dt + op.A * err.velocity[uj] +
                                op.B.transpose() * err.pressure[uj];
    CHECK((lhs - r1).norm() <= 1e-9 * std::max(1.0, r1.norm()));
  }
}
