// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"

using namespace rbstokes;
using Catch::Approx;

namespace {
SpMat sparse_identity(int n) {
  SpMat I(n, n);
  I.setIdentity();
  return I;
}

std::shared_ptr<const TruthModel> model_k10() {
  static const auto m = make_channel_model(1, TimeGrid(1.0, 10));
  return m;
}

const ConstantBounds& constants_k10() {
  static const ConstantOracle o(model_k10());
  static const ConstantBounds b =
      train_constant_bounds(o, model_k10()->ops.geometry->domain().tensor_grid(3), 1.0).first;
  return b;
}
}  // namespace

TEST_CASE("pod of degenerate and tied snapshot sets", "[sampling]") {
  const auto I = sparse_identity(3);
  Eigen::VectorXd s(3);
  s << 1.0, 2.0, 2.0;
  const auto a = pod_basis({s, s}, 1, I);
  CHECK(a.numerical_rank == 1);
  CHECK((a.modes[0] - s / 3.0).norm() < 1e-14);
  CHECK(a.eigenvalues[0] == Approx(18.0).epsilon(1e-14));
  CHECK_THROWS_AS(pod_basis({s, s}, 2, I), UsageError);

  const auto b = pod_basis({Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY()}, 1, I);
  CHECK((b.modes[0] - Eigen::Vector3d::UnitX()).norm() < 1e-14);
  const auto c = pod_basis({Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitX()}, 1, I);
  CHECK((c.modes[0] - Eigen::Vector3d::UnitY()).norm() < 1e-14);
}

TEST_CASE("pod discarded-eigenvalue identity", "[sampling]") {
  const auto& model = model_k10();
  const auto tr = TruthSolver(model).solve(make_parameter({0.9, 1.2}), 0.0);
  const std::vector<Eigen::VectorXd> snaps(tr.velocity.begin() + 1, tr.velocity.end());
  const auto& X = model->spaces.X_inner;
  for (int M : {1, 3, 5}) {  // 10 snapshots, numerical rank 5 at r=1
    const auto pod = pod_basis(snaps, M, X);
    REQUIRE(static_cast<int>(pod.modes.size()) == M);
    double err = 0.0;
    for (const auto& v : snaps) {
      Eigen::VectorXd e = v;
      for (const auto& w : pod.modes) e -= w * w.dot(X * v);
      err += e.dot(X * e);
    }
    const double discarded = pod.eigenvalues.tail(pod.eigenvalues.size() - M).sum();
    CHECK(err / snaps.size() == Approx(discarded / snaps.size()).epsilon(1e-10).margin(1e-14 * pod.eigenvalues[0]));
    // modes are X-orthonormal
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j)
        CHECK(pod.modes[i].dot(X * pod.modes[j]) == Approx(i == j ? 1.0 : 0.0).margin(1e-10));
  }
}

TEST_CASE("stabilization indicators", "[sampling]") {
  CHECK(beta_indicator(0.2, 0.1) == 0.0);
  CHECK(beta_indicator(0.0, 0.1) == 1.0);
  CHECK(beta_indicator(0.05, 0.1) == Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(beta_indicator(0.1, 0.0), UsageError);

  CHECK(kappa_indicator(Eigen::MatrixXd::Identity(4, 4)) == 1.0);
  CHECK(kappa_indicator(Eigen::Vector2d(10.0, 0.1).asDiagonal().toDenseMatrix()) == Approx(100.0).epsilon(1e-14));
  CHECK(std::isinf(kappa_indicator(Eigen::Vector2d(1.0, 0.0).asDiagonal().toDenseMatrix())));
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd R(6, 6);
    for (int i = 0; i < 36; ++i) R.data()[i] = nd(gen);
    for (const Eigen::MatrixXd& K : {Eigen::MatrixXd(R), Eigen::MatrixXd(R + R.transpose())}) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
      const auto& sv = svd.singularValues();
      CHECK(kappa_indicator(K) == Approx(sv[0] / sv[5]).epsilon(1e-10));
    }
  }
}

TEST_CASE("greedy on a single training parameter", "[sampling]") {
  const auto& model = model_k10();
  GreedyConfig cfg;
  cfg.training_sample = {make_parameter({1.1, 0.9})};
  cfg.pod_rank = 10;
  cfg.tol = 1e-3;
  const auto res = pod_greedy_eps0(model, constants_k10(), cfg);
  REQUIRE(!res.trace.iterations.empty());
  // all modes above the 1e-12 relative eigenvalue cut: projection error ~ sqrt(K 1e-12) ~ 3e-6,
  // times the bound effectivity
  CHECK(res.trace.iterations.front().max_relative_bound < 1e-4);
  CHECK(res.trace.converged);
  CHECK(res.trace.iterations.size() == 1);
  CHECK(res.trace.algorithm == "pod_greedy_eps0");
}

TEST_CASE("greedy invariants on a small sample", "[sampling]") {
  const auto& model = model_k10();
  const auto& dom = model->ops.geometry->domain();
  GreedyConfig cfg;
  cfg.training_sample = dom.random_sample(12, 21);
  cfg.tol = 1e-2;
  cfg.max_outer = 12;
  const auto res = pod_greedy_eps0(model, constants_k10(), cfg);
  const auto& tr = res.trace;
  REQUIRE(!tr.iterations.empty());

  SECTION("stabilized exits meet the beta threshold") {
    for (const auto& it : tr.iterations)
      if (it.stabilized) CHECK(it.max_indicator < cfg.stab_tol);
  }
  SECTION("bases are nested and sizes grow") {
    for (std::size_t i = 1; i < tr.iterations.size(); ++i) {
      CHECK(tr.iterations[i].NX >= tr.iterations[i - 1].NX);
      CHECK(tr.iterations[i].NY > tr.iterations[i - 1].NY);
    }
    CHECK(res.database.NX == res.spaces.NX());
  }
  SECTION("velocity pod sources respect the proximity rule") {
    std::vector<Parameter> used;
    for (const auto& it : tr.iterations) {
      used.push_back(it.mu_N);
      for (const auto& e : it.events) {
        if (e.action != StabilizationAction::pod_enrich) continue;
        for (const auto& p : used) CHECK((e.mu_source - p).norm() / p.norm() >= cfg.proximity);
        used.push_back(e.mu_source);
      }
    }
  }
  SECTION("next parameter is the argmax with lowest-index ties") {
    const auto sweep = PodGreedy(model, constants_k10(), cfg).sweep_sample(res.database, BoundKind::sym);
    std::size_t best = 0;
    for (std::size_t i = 1; i < sweep.size(); ++i)
      if (sweep[i].relative_bound > sweep[best].relative_bound) best = i;
    CHECK(tr.iterations.back().max_relative_bound == sweep[best].relative_bound);
    CHECK(tr.iterations.back().next_mu == cfg.training_sample[best]);
  }
  SECTION("identical configuration reproduces the trace") {
    const auto again = pod_greedy_eps0(model, constants_k10(), cfg);
    REQUIRE(again.trace.iterations.size() == tr.iterations.size());
    for (std::size_t i = 0; i < tr.iterations.size(); ++i) {
      CHECK(again.trace.iterations[i].max_relative_bound == tr.iterations[i].max_relative_bound);
      CHECK(again.trace.iterations[i].NX == tr.iterations[i].NX);
    }
  }
}

TEST_CASE("penalty greedy dispatch and validation", "[sampling]") {
  const auto& model = model_k10();
  GreedyConfig cfg;
  cfg.training_sample = model->ops.geometry->domain().random_sample(6, 4);
  cfg.tol = 5e-2;
  cfg.max_outer = 6;
  cfg.eps = 1e-3;
  cfg.stab_tol = 1e3;
  const auto res = pod_greedy_penalty(model, constants_k10(), cfg);
  CHECK(res.trace.algorithm == "pod_greedy_penalty");
  CHECK(res.trace.eps == 1e-3);
  for (const auto& it : res.trace.iterations)
    if (it.stabilized) CHECK(it.max_indicator < cfg.stab_tol);

  CHECK_THROWS_AS(pod_greedy_eps0(model, constants_k10(), cfg), ConfigError);
  GreedyConfig bad = cfg;
  bad.training_sample.clear();
  CHECK_THROWS_AS(pod_greedy_penalty(model, constants_k10(), bad), ConfigError);
  bad = cfg;
  bad.eps = 0.0;
  CHECK_THROWS_AS(pod_greedy_penalty(model, constants_k10(), bad), ConfigError);
}
