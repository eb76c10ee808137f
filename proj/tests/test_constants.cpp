// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"

using namespace rbstokes;
using Catch::Approx;

namespace {
std::shared_ptr<const TruthModel> model_r1() {
  static const auto m = make_channel_model(1, TimeGrid(1.0, 4));
  return m;
}
const ConstantOracle& oracle_r1() {
  static const ConstantOracle o(model_r1());
  return o;
}
}  // namespace

TEST_CASE("lanczos on small synthetic pencils", "[constants]") {
  Eigen::MatrixXd A(2, 2);
  A << 2, 0, 0, 3;
  auto id = [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return v; };
  auto ap = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return A * v; };
  auto inv = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return A.ldlt().solve(v); };
  const auto big = lanczos_largest(ap, id, 2);
  const auto small = lanczos_largest(inv, id, 2);
  CHECK(big.converged);
  CHECK(big.largest == Approx(3.0).epsilon(1e-14));
  CHECK(1.0 / small.largest == Approx(2.0).epsilon(1e-14));

  // nontrivial weight: K = diag(1..n), W = diag(2), eigenvalues of W^{-1}K are i/2
  const int n = 60;
  Eigen::VectorXd k = Eigen::VectorXd::LinSpaced(n, 1.0, n);
  auto kw = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return 0.5 * k.cwiseProduct(v); };
  auto w2 = [](const Eigen::VectorXd& v) -> Eigen::VectorXd { return 2.0 * v; };
  const auto r = lanczos_largest(kw, w2, n);
  CHECK(r.converged);
  CHECK(r.largest == Approx(n / 2.0).epsilon(1e-10));
}

TEST_CASE("pencil eigenvalues", "[constants]") {
  Eigen::Matrix2d A, B;
  A << 4, 1, 1, 3;
  B << 2, 0.5, 0.5, 1;
  const auto l = pencil_eigs_2x2(A, B);
  const auto d = oracle::dense_gen_eigs(A, B);
  CHECK(l[0] == Approx(d[0]).epsilon(1e-13));
  CHECK(l[1] == Approx(d[1]).epsilon(1e-13));
  const auto same = pencil_eigs_2x2(B, B);
  CHECK(same[0] == Approx(1.0).epsilon(1e-14));
  CHECK(same[1] == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("exact constants against dense oracles", "[constants]") {
  const auto& o = oracle_r1();
  const auto& sp = model_r1()->spaces;
  const Eigen::MatrixXd X(sp.X_inner), Y(sp.Y_inner);
  for (const auto& v : {std::vector<double>{1.0, 1.0}, {0.6, 1.4}, {1.45, 0.55}}) {
    const Parameter mu = Eigen::Map<const Eigen::VectorXd>(v.data(), 2);
    const auto op = assemble_at(model_r1()->ops, mu);
    const auto c = o.all(mu);
    const Eigen::MatrixXd A(op.A), M(op.M), C(op.C), B(op.B);
    const auto ea = oracle::dense_gen_eigs(A, X);
    const auto em = oracle::dense_gen_eigs(M, X);
    const auto ec = oracle::dense_gen_eigs(C, Y);
    CHECK(c[size_t(ConstantKind::alpha_a)] == Approx(ea[0]).epsilon(1e-8));
    CHECK(c[size_t(ConstantKind::gamma_a)] == Approx(ea[ea.size() - 1]).epsilon(1e-8));
    CHECK(c[size_t(ConstantKind::gamma_m)] == Approx(em[em.size() - 1]).epsilon(1e-8));
    CHECK(c[size_t(ConstantKind::alpha_c)] == Approx(ec[0]).epsilon(1e-8));
    CHECK(c[size_t(ConstantKind::gamma_c)] == Approx(ec[ec.size() - 1]).epsilon(1e-8));
    CHECK(c[size_t(ConstantKind::beta)] == Approx(oracle::dense_infsup(B, X, Y)).epsilon(1e-8));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Y.llt().matrixL().solve(B) * Eigen::MatrixXd(X.llt().matrixU().solve(Eigen::MatrixXd::Identity(X.rows(), X.rows()))));
    CHECK(c[size_t(ConstantKind::gamma_b)] == Approx(svd.singularValues()[0]).epsilon(1e-8));
  }
}

TEST_CASE("operator equal to the inner product gives unit constants", "[constants]") {
  const auto& sp = model_r1()->spaces;
  const auto& o = oracle_r1();
  const auto mu = make_parameter({1.0, 1.0});
  auto op = assemble_at(model_r1()->ops, mu);
  op.A = sp.X_inner;
  op.M = sp.X_inner;
  op.C = sp.Y_inner;
  CHECK(o.compute(ConstantKind::alpha_a, op, mu) == Approx(1.0).epsilon(1e-10));
  CHECK(o.compute(ConstantKind::gamma_a, op, mu) == Approx(1.0).epsilon(1e-10));
  CHECK(o.compute(ConstantKind::gamma_m, op, mu) == Approx(1.0).epsilon(1e-10));
  CHECK(o.compute(ConstantKind::alpha_c, op, mu) == Approx(1.0).epsilon(1e-10));
  CHECK(o.compute(ConstantKind::gamma_c, op, mu) == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("trained bounds bracket the exact constants", "[constants]") {
  const auto& o = oracle_r1();
  const auto grid = model_r1()->ops.geometry->domain().tensor_grid(3);
  const auto check = model_r1()->ops.geometry->domain().random_sample(25, 77);
  const auto [bounds, report] = train_constant_bounds(o, grid, 0.5, check);

  SECTION("training points are interpolated") {
    for (const auto& mu : grid) {
      const auto bc = bounds.bound_constants_at(mu);
      const auto ex = o.all(mu);
      for (auto k : kAllConstantKinds) {
        const auto [lb, ub] = bc.range(k);
        CHECK(lb == Approx(ex[size_t(k)]).epsilon(1e-12));
        CHECK(ub == Approx(ex[size_t(k)]).epsilon(1e-12));
      }
    }
  }
  SECTION("rigor at random parameters") {
    int violations = 0;
    double beta_min = 1e300;
    for (const auto& mu : check) {
      const auto bc = bounds.bound_constants_at(mu);
      const auto ex = o.all(mu);
      for (auto k : kAllConstantKinds) {
        const auto [lb, ub] = bc.range(k);
        const double e = ex[size_t(k)];
        if (!(lb <= e * (1 + 1e-12) && e <= ub * (1 + 1e-12))) ++violations;
        if (k != ConstantKind::gamma_b && k != ConstantKind::gamma_c && k != ConstantKind::gamma_m &&
            k != ConstantKind::gamma_a)
          CHECK(lb > 0.0);
      }
      beta_min = std::min(beta_min, ex[size_t(ConstantKind::beta)]);
    }
    CHECK(violations == 0);
    CHECK(beta_min > 0.0);
    INFO("min beta over sample " << beta_min);
  }
  SECTION("single-point training") {
    const auto mu = make_parameter({0.8, 1.3});
    const auto [b1, r1] = train_constant_bounds(o, {mu}, 0.01);
    CHECK(r1.tolerance_met);
    const auto bc = b1.bound_constants_at(mu);
    for (auto k : kAllConstantKinds) CHECK(bc.range(k).first == bc.range(k).second);
  }
  SECTION("gap report matches the check sample") {
    for (auto k : kAllConstantKinds) CHECK(report.max_gap[size_t(k)] >= 0.0);
    CHECK(report.tolerance_met == (report.notes.empty()));
  }
}

TEST_CASE("untrained bounds are a usage error", "[constants]") {
  ConstantBounds b;
  CHECK_THROWS_AS(b.bound_constants_at(make_parameter({1.0, 1.0})), UsageError);
  CHECK_THROWS_AS(train_constant_bounds(oracle_r1(), {}, 0.1), ConfigError);
}

TEST_CASE("mass and stiffness continuity ratio stays bounded", "[constants]") {
  const auto& o = oracle_r1();
  const auto& dom = model_r1()->ops.geometry->domain();
  double ref_max = 0.0;
  for (const auto& mu : dom.tensor_grid(3))
    ref_max = std::max(ref_max, o.exact_constant(ConstantKind::gamma_m, mu) / o.exact_constant(ConstantKind::gamma_a, mu));
  for (const auto& mu : dom.random_sample(10, 5)) {
    const double r = o.exact_constant(ConstantKind::gamma_m, mu) / o.exact_constant(ConstantKind::gamma_a, mu);
    CHECK(r <= 1.01 * ref_max);
  }
}
