// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"

using namespace rbstokes;
using Catch::Approx;

namespace {
std::shared_ptr<const TruthModel> model_k8() {
  static const auto m = make_channel_model(1, TimeGrid(1.0, 8));
  return m;
}
const InnerProducts& ip_k8() {
  static const InnerProducts ip(model_k8()->spaces);
  return ip;
}

ResidualNorms norms_of(std::vector<double> r1, std::vector<double> r2) {
  ResidualNorms n;
  n.r1 = {0.0};
  n.r2 = {0.0};
  n.r1.insert(n.r1.end(), r1.begin(), r1.end());
  n.r2.insert(n.r2.end(), r2.begin(), r2.end());
  return n;
}

BoundConstants unit_constants() {
  BoundConstants c;
  for (auto k : kAllConstantKinds) c.set(k, 1.0, 1.0);
  return c;
}
}  // namespace

TEST_CASE("riesz representer against a dense inverse", "[error]") {
  const auto& sp = model_k8()->spaces;
  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  for (Field f : {Field::velocity, Field::pressure}) {
    const bool vel = f == Field::velocity;
    const Eigen::MatrixXd W(vel ? sp.X_inner : sp.Y_inner);
    Eigen::VectorXd r(W.rows());
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = nd(gen);
    const auto rr = riesz_representer(ip_k8(), r, f);
    const Eigen::VectorXd z = W.inverse() * r;
    CHECK(rr.dual_norm == Approx(std::sqrt(r.dot(z))).epsilon(1e-10));
    CHECK((rr.representer - z).norm() < 1e-10 * z.norm());
    // Riesz identity: (w, v)_W = r(v)
    const Eigen::VectorXd v = Eigen::VectorXd::Ones(r.size());
    CHECK(rr.representer.dot(W * v) == Approx(r.dot(v)).epsilon(1e-10));
  }
}

TEST_CASE("online residual norms agree with the truth-side evaluation", "[error]") {
  const auto& model = model_k8();
  const auto mu0 = make_parameter({1.0, 1.0});
  TruthSolver solver(model);
  const auto tr = solver.solve(mu0, 0.0);
  RBSpacePair s(model);
  s.append_basis({tr.pressure[3], tr.pressure[8]}, Field::pressure, {{mu0, 0, BasisKind::pod_pressure}, {mu0, 1, BasisKind::pod_pressure}});
  s.append_basis({tr.velocity[3], tr.velocity[8]}, Field::velocity, {{mu0, 0, BasisKind::pod_velocity}, {mu0, 1, BasisKind::pod_velocity}});
  s.append_basis({supremizer(*model, ip_k8(), mu0, s.pressure_basis().col(0))}, Field::velocity,
                 {{mu0, 8, BasisKind::supremizer}});
  static const ConstantOracle o(model);
  const auto cb = train_constant_bounds(o, {mu0}, 1.0).first;
  for (double eps : {0.0, 1e-4}) {
    const auto db = compress_offline(s, cb, eps);
    for (const auto& v : {std::vector<double>{0.6, 1.4}, {1.45, 1.45}, {1.0, 1.0}}) {
      const Parameter mu = Eigen::Map<const Eigen::VectorXd>(v.data(), 2);
      const auto rb = solve_rb_online(db, mu, eps);
      const auto online = residual_norms_online(db, rb, mu, eps);
      const auto direct = residual_norms_direct(*model, ip_k8(), reconstruct(rb, s.velocity_basis(), s.pressure_basis()));
      for (int k = 1; k <= 8; ++k) {
        const auto i = static_cast<std::size_t>(k);
        CHECK(online.r1[i] == Approx(direct.r1[i]).epsilon(1e-8));
        // at eps = 0 r2 vanishes up to roundoff, hence the absolute floor
        CHECK(online.r2[i] == Approx(direct.r2[i]).epsilon(1e-8).margin(1e-13));
      }
    }
  }
}

TEST_CASE("bound formulas on hand-evaluated inputs", "[error]") {
  const auto n = norms_of({1.0}, {1.0});
  auto c = unit_constants();
  CHECK(bound_nonsym(n, c, 1.0, 1).values.back() == Approx(std::sqrt(7.0)).epsilon(1e-15));
  CHECK(bound_sym(n, c, 1.0, 1).values.back() == Approx(std::sqrt(7.0)).epsilon(1e-15));
  CHECK(effectivity(bound_sym(n, c, 1.0, 1).values.back(), 1.0) == Approx(2.6458).epsilon(1e-4));
  c.gamma_a_ub = 4.0;
  CHECK(bound_nonsym(n, c, 1.0, 1).values.back() == Approx(std::sqrt(28.0)).epsilon(1e-15));
  CHECK(bound_sym(n, c, 1.0, 1).values.back() == Approx(std::sqrt(12.0)).epsilon(1e-15));
  CHECK(bound_penalty(n, c, 1.0, 1.0, 1).values.back() == Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(bound_penalty(norms_of({1.0}, {2.0}), c, 1.0, 1.0, 1).values.back() == Approx(std::sqrt(5.0)).epsilon(1e-15));
  CHECK(bound_nonsym(n, c, 1.0, 0).values.back() == 0.0);
}

TEST_CASE("bound series properties", "[error]") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 2.0), pos(0.05, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a, b;
    for (int k = 0; k < 12; ++k) {
      a.push_back(u(gen));
      b.push_back(u(gen));
    }
    const auto n = norms_of(a, b);
    BoundConstants c;
    c.alpha_a_lb = pos(gen);
    c.gamma_a_ub = c.alpha_a_lb + pos(gen);  // gamma_a >= alpha_a always
    c.gamma_m_ub = pos(gen);
    c.beta_lb = pos(gen);
    c.alpha_c_lb = pos(gen);
    const double dt = 0.1;
    const auto sym = bound_sym(n, c, dt, 12), non = bound_nonsym(n, c, dt, 12);
    for (int k = 1; k <= 12; ++k) {
      CHECK(sym.values[k] <= non.values[k] * (1 + 1e-14));
      CHECK(sym.values[k] >= sym.values[k - 1]);
      CHECK(non.values[k] >= non.values[k - 1]);
    }
  }
  // pure constraint residual: penalty bound scales like 1/sqrt(eps)
  const auto n = norms_of({0.0, 0.0}, {1.0, 1.0});
  const auto c = unit_constants();
  const double b2 = bound_penalty(n, c, 0.5, 1e-2, 2).values.back();
  const double b4 = bound_penalty(n, c, 0.5, 1e-4, 2).values.back();
  CHECK(b4 / b2 == Approx(10.0).epsilon(1e-12));
}

TEST_CASE("bound argument validation", "[error]") {
  const auto n = norms_of({1.0}, {1.0});
  auto c = unit_constants();
  CHECK_THROWS_AS(bound_penalty(n, c, 1.0, 0.0, 1), UsageError);
  CHECK_THROWS_AS(bound_sym(n, c, 1.0, 2), UsageError);
  c.beta_lb = 0.0;
  CHECK_THROWS_AS(bound_nonsym(n, c, 1.0, 1), UsageError);
  CHECK(parse_bound_kind("sym") == BoundKind::sym);
  CHECK_THROWS_AS(parse_bound_kind("energy"), UsageError);
}

TEST_CASE("effectivity sentinels", "[error]") {
  CHECK(effectivity(2.0, 1.0) == 2.0);
  CHECK(std::isinf(effectivity(1e-3, 0.0)));
  CHECK(effectivity(0.0, 0.0) == 1.0);
}
