// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbstokes/error_estimation.hpp"
#include "rbstokes/errors.hpp"
#include "rbstokes/rb_core.hpp"
#include "rbstokes/stability_constants.hpp"
#include "rbstokes/truth_solver.hpp"

namespace rbstokes {

struct PodResult {
  std::vector<Eigen::VectorXd> modes;   // W-orthonormal
  Eigen::VectorXd eigenvalues;          // all snapshot Gram eigenvalues, descending
  int numerical_rank = 0;
};

inline constexpr double kPodRankTolerance = 1e-12;

namespace detail {

// Eigenpairs of the snapshot Gram matrix sorted by eigenvalue (descending), ties resolved so
// that inside a cluster of equal eigenvalues the vectors follow snapshot order.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> ordered_gram_eigs(const Eigen::MatrixXd& K) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  const Eigen::Index n = K.rows();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  const Eigen::VectorXd& ev = es.eigenvalues();
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return ev[a] > ev[b]; });
  Eigen::VectorXd lam(n);
  Eigen::MatrixXd U(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lam[i] = ev[idx[static_cast<std::size_t>(i)]];
    U.col(i) = es.eigenvectors().col(idx[static_cast<std::size_t>(i)]);
  }
  const double scale = std::max(std::abs(lam.size() ? lam[0] : 0.0), std::numeric_limits<double>::min());
  for (Eigen::Index s = 0; s < n;) {
    Eigen::Index e = s + 1;
    while (e < n && std::abs(lam[e] - lam[s]) <= 1e-10 * scale) ++e;
    if (e - s > 1) {
      // rotate the cluster basis: Gram-Schmidt of the projected unit vectors e_1, e_2, ...
      const Eigen::MatrixXd C = U.middleCols(s, e - s);
      Eigen::MatrixXd out(n, 0);
      for (Eigen::Index i = 0; i < n && out.cols() < e - s; ++i) {
        Eigen::VectorXd v = C * C.row(i).transpose();
        for (int pass = 0; pass < 2; ++pass)
          if (out.cols() > 0) v -= out * (out.transpose() * v);
        const double nv = v.norm();
        if (nv > 1e-8) {
          out.conservativeResize(Eigen::NoChange, out.cols() + 1);
          out.col(out.cols() - 1) = v / nv;
        }
      }
      U.middleCols(s, e - s) = out;
    }
    s = e;
  }
  // sign convention: largest-magnitude entry positive
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index j;
    U.col(i).cwiseAbs().maxCoeff(&j);
    if (U(j, i) < 0.0) U.col(i) *= -1.0;
  }
  return {lam, U};
}

}  // namespace detail

namespace detail {
inline PodResult pod_impl(const std::vector<Eigen::VectorXd>& snapshots, int M, const SpMat& W, bool cap) {
  if (snapshots.empty()) throw UsageError("pod_basis: empty snapshot set");
  const Eigen::Index n = snapshots.front().size(), I = static_cast<Eigen::Index>(snapshots.size());
  Eigen::MatrixXd S(n, I);
  for (Eigen::Index i = 0; i < I; ++i) S.col(i) = snapshots[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd WS = W * S;
  Eigen::MatrixXd K = S.transpose() * WS;
  K = 0.5 * (K + K.transpose()).eval();
  auto [lam, U] = detail::ordered_gram_eigs(K);
  PodResult out;
  out.eigenvalues = lam;
  const double top = lam.size() ? lam[0] : 0.0;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (top > 0.0 && lam[i] > kPodRankTolerance * top) ++out.numerical_rank;
  if (cap) M = std::min(M, out.numerical_rank);
  if (M > out.numerical_rank)
    throw UsageError("pod_basis: requested rank " + std::to_string(M) + " exceeds the numerical rank " +
                     std::to_string(out.numerical_rank) + " of the snapshot set");
  Eigen::MatrixXd modes(n, 0), Wmodes(n, 0);
  for (int m = 0; m < M; ++m) {
    Eigen::VectorXd v = S * U.col(m) / std::sqrt(lam[m]);
    for (int pass = 0; pass < 2; ++pass)
      if (modes.cols() > 0) v -= modes * (Wmodes.transpose() * v);
    const Eigen::VectorXd Wv = W * v;
    const double nv = std::sqrt(std::max(0.0, v.dot(Wv)));
    modes.conservativeResize(Eigen::NoChange, modes.cols() + 1);
    Wmodes.conservativeResize(Eigen::NoChange, Wmodes.cols() + 1);
    modes.col(m) = v / nv;
    Wmodes.col(m) = Wv / nv;
    out.modes.push_back(modes.col(m));
  }
  return out;
}
}  // namespace detail

// Rank-M POD of the snapshot set in the W inner product, by the method of snapshots.
// Mean squared projection error over the set equals (sum of discarded eigenvalues) / |I|.
inline PodResult pod_basis(const std::vector<Eigen::VectorXd>& snapshots, int M, const SpMat& W) {
  return detail::pod_impl(snapshots, M, W, false);
}

// d^beta_N = max((beta_ub - beta_N) / beta_ub, 0).
inline double beta_indicator(double beta_n, double beta_ub) {
  if (!(beta_ub > 0.0)) throw UsageError("beta_indicator needs beta_ub > 0");
  return std::clamp((beta_ub - beta_n) / beta_ub, 0.0, 1.0);
}

// sigma_max / sigma_min of the reduced block matrix; the matrix is symmetric, so the singular
// values are the absolute eigenvalues.
inline double kappa_indicator(const Eigen::MatrixXd& K) {
  if (K.rows() == 0) return 1.0;
  Eigen::VectorXd s;
  if (K.isApprox(K.transpose(), 1e-13)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Eigen::EigenvaluesOnly);
    s = es.eigenvalues().cwiseAbs();
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(K);
    s = svd.singularValues();
  }
  const double mn = s.minCoeff(), mx = s.maxCoeff();
  if (mn < 1e-300) return std::numeric_limits<double>::infinity();
  return mx / mn;
}

// ---------------------------------------------------------------------------------------------
// POD-greedy training.

struct GreedyConfig {
  std::vector<Parameter> training_sample;
  double tol = 1e-3;
  double stab_tol = 0.1;  // delta^beta_tol for eps = 0, delta^kappa_tol for eps > 0
  int pod_rank = 2;
  std::size_t mu_1_index = 0;
  int max_outer = 60;
  int max_inner = 20;
  int max_stagnant = 3;  // stabilization steps in a row that fail to lower the max indicator
  double eps = 0.0;
  double proximity = 1e-3;
};

enum class StabilizationAction { pod_enrich, supremizer_enrich };

inline const char* to_string(StabilizationAction a) {
  return a == StabilizationAction::pod_enrich ? "pod_enrich" : "supremizer_enrich";
}

struct StabilizationEvent {
  Parameter mu_star;
  double indicator = 0.0;
  StabilizationAction action = StabilizationAction::pod_enrich;
  Parameter mu_source;  // parameter whose snapshots (pod) or RB pressure (supremizer) were used
  int NX = 0, NY = 0;   // after the action
};

struct GreedyIteration {
  int N = 0;
  Parameter mu_N;
  double max_relative_bound = 0.0;  // after the inner loop; argmax is the next mu
  Parameter next_mu;
  double max_indicator = 0.0;       // at the inner-loop exit
  std::vector<StabilizationEvent> events;
  int NX = 0, NY = 0;
  double seconds = 0.0;
  bool stabilized = true;  // inner loop left through the indicator threshold
  std::string note;
};

struct GreedyTrace {
  std::string algorithm;  // "pod_greedy_eps0" or "pod_greedy_penalty"
  double eps = 0.0;
  std::vector<GreedyIteration> iterations;
  bool converged = false;
  std::string note;
  std::string constants_mode;

  int unstabilized_exits() const {
    int n = 0;
    for (const auto& it : iterations) n += !it.stabilized;
    return n;
  }
  int stabilization_events() const {
    int n = 0;
    for (const auto& it : iterations) n += static_cast<int>(it.events.size());
    return n;
  }
  int supremizer_events() const {
    int n = 0;
    for (const auto& it : iterations)
      for (const auto& e : it.events) n += e.action == StabilizationAction::supremizer_enrich;
    return n;
  }
};

// Everything an online evaluation at one mu produces during a sweep.
struct SweepPoint {
  double relative_bound = std::numeric_limits<double>::infinity();
  double bound = std::numeric_limits<double>::infinity();
  double indicator = 1.0;
  bool unstable = false;
};

// Online relative bound at mu: Delta^K_N / |(u_N)|_{l2(0,K;X)} for eps = 0 (sym bound) and
// Delta^{eps,K}_N / |(u_N, p_N)|_{l2(0,K;Z)} for eps > 0.
struct OnlineEvaluation {
  ReducedTrajectory traj;
  ResidualNorms norms;
  BoundSeries bound;
  EnergyReport rb_norms;
  BoundConstants constants;
  double relative_bound = 0.0;
  double beta_n = 0.0;
  double kappa = 0.0;
};

inline OnlineEvaluation evaluate_online(const RBDatabase& db, const Parameter& mu, double eps, BoundKind kind,
                                        bool indicators, const std::optional<BoundConstants>& override_constants = {}) {
  OnlineEvaluation ev;
  const auto coeffs = db.coefficients(mu);
  const auto sys = reduced_system(db, coeffs);
  ev.traj = solve_rb_online(db, sys, mu, eps);
  ev.norms = residual_norms_online(db, ev.traj, coeffs, eps);
  ev.constants = override_constants ? *override_constants : db.constants.bound_constants_at(mu);
  ev.bound = compute_bound(kind, ev.norms, ev.constants, db.grid.dt(), eps, db.grid.K);
  ev.rb_norms = reduced_energy_norms(ev.traj, sys, db.grid.dt(), eps);
  const double denom = kind == BoundKind::penalty ? ev.rb_norms.l2_Z.back() : ev.rb_norms.l2_X.back();
  ev.relative_bound = denom > 0.0 ? ev.bound.values.back() / denom : std::numeric_limits<double>::infinity();
  if (indicators) {
    if (eps == 0.0)
      ev.beta_n = rb_infsup(sys.B);
    else
      ev.kappa = kappa_indicator(reduced_block_matrix(sys, db.grid.dt(), eps));
  }
  return ev;
}

struct GreedyResult {
  RBSpacePair spaces;
  RBDatabase database;
  GreedyTrace trace;
};

// Shared driver for both algorithms; they differ in the bound, its normalization and the
// stabilization indicator.
class PodGreedy {
 public:
  PodGreedy(std::shared_ptr<const TruthModel> model, ConstantBounds constants, GreedyConfig config)
      : model_(std::move(model)), constants_(std::move(constants)), cfg_(std::move(config)), solver_(model_) {
    if (cfg_.training_sample.empty()) throw ConfigError("greedy needs a nonempty training sample");
    if (cfg_.mu_1_index >= cfg_.training_sample.size()) throw ConfigError("mu_1 must belong to the training sample");
    if (!(cfg_.tol > 0.0 && cfg_.tol < 1.0)) throw ConfigError("greedy tolerance must lie in (0, 1)");
    if (cfg_.pod_rank < 1) throw ConfigError("POD rank must be >= 1");
    if (cfg_.eps == 0.0 && !(cfg_.stab_tol > 0.0 && cfg_.stab_tol < 1.0))
      throw ConfigError("beta stabilization tolerance must lie in (0, 1)");
    if (cfg_.eps > 0.0 && !(cfg_.stab_tol > 0.0)) throw ConfigError("kappa stabilization tolerance must be > 0");
    if (!(cfg_.eps >= 0.0)) throw ConfigError("penalty parameter must be >= 0");
    for (const auto& mu : cfg_.training_sample) model_->ops.geometry->domain().require(mu);
  }

  GreedyResult run() {
    const auto ip = std::make_shared<const InnerProducts>(model_->spaces);
    RBSpacePair spaces(model_);
    OfflineCompressor comp(model_, ip);
    GreedyTrace trace;
    const bool penalty = cfg_.eps > 0.0;
    trace.algorithm = penalty ? "pod_greedy_penalty" : "pod_greedy_eps0";
    trace.eps = cfg_.eps;
    trace.constants_mode = "bounded+heuristic_beta";
    const BoundKind kind = penalty ? BoundKind::penalty : BoundKind::sym;
    const auto& sigma = cfg_.training_sample;

    std::vector<Parameter> DN, Dprime;
    Parameter mu_N = sigma[cfg_.mu_1_index];
    RBDatabase db;
    for (int N = 1; N <= cfg_.max_outer; ++N) {
      const auto t0 = std::chrono::steady_clock::now();
      GreedyIteration it;
      it.N = N;
      it.mu_N = mu_N;
      DN.push_back(mu_N);
      const Trajectory truth = solver_.solve(mu_N, cfg_.eps);
      append_pod(spaces, truth.pressure, Field::pressure, mu_N, BasisKind::pod_pressure);
      if (!contains(Dprime, mu_N)) append_pod(spaces, truth.velocity, Field::velocity, mu_N, BasisKind::pod_velocity);

      int inner = 0, stagnant = 0;
      double best = std::numeric_limits<double>::infinity();
      while (true) {
        comp.update(spaces);
        db = comp.database(spaces, cfg_.eps, constants_);
        const auto sweep = sweep_sample(db, kind);
        const std::size_t ibound = argmax(sweep, [](const SweepPoint& p) { return p.relative_bound; });
        const std::size_t iind = argmax(sweep, [](const SweepPoint& p) { return p.indicator; });
        const double ind = sweep[iind].indicator;
        it.max_relative_bound = sweep[ibound].relative_bound;
        it.next_mu = sigma[ibound];
        it.max_indicator = ind;
        if (ind < cfg_.stab_tol) break;
        stagnant = ind < best ? 0 : stagnant + 1;
        best = std::min(best, ind);
        if (stagnant >= cfg_.max_stagnant) {
          it.stabilized = false;
          it.note = "indicator stagnated";
          break;
        }
        if (++inner > cfg_.max_inner) {
          it.stabilized = false;
          it.note = "inner cap reached";
          break;
        }
        const Parameter& mu_prime = sigma[ibound];
        const Parameter& mu_star = sigma[iind];
        StabilizationEvent ev;
        ev.mu_star = mu_star;
        ev.indicator = ind;
        bool ok = false;
        if (min_relative_distance(mu_prime, Dprime, DN) >= cfg_.proximity) {
          Dprime.push_back(mu_prime);
          const Trajectory tr = solver_.solve(mu_prime, cfg_.eps);
          ev.action = StabilizationAction::pod_enrich;
          ev.mu_source = mu_prime;
          ok = append_pod(spaces, tr.velocity, Field::velocity, mu_prime, BasisKind::pod_velocity) > 0;
        }
        if (!ok) {
          ev.action = StabilizationAction::supremizer_enrich;
          ev.mu_source = mu_star;
          ok = append_supremizer(spaces, db, *ip, mu_star);
        }
        ev.NX = spaces.NX();
        ev.NY = spaces.NY();
        it.events.push_back(ev);
        if (!ok) {
          it.stabilized = false;
          it.note = "no admissible enrichment";
          break;
        }
      }
      it.NX = spaces.NX();
      it.NY = spaces.NY();
      it.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      trace.iterations.push_back(it);
      if (it.max_relative_bound < cfg_.tol) {
        trace.converged = true;
        break;
      }
      mu_N = it.next_mu;
    }
    if (!trace.converged) trace.note = "max_outer=" + std::to_string(cfg_.max_outer) + " reached";
    if (trace.unstabilized_exits() > 0) {
      if (!trace.note.empty()) trace.note += "; ";
      trace.note += std::to_string(trace.unstabilized_exits()) + " outer iteration(s) left unstabilized";
    }
    db.velocity_basis = spaces.velocity_basis();
    db.pressure_basis = spaces.pressure_basis();
    return {std::move(spaces), std::move(db), std::move(trace)};
  }

  std::vector<SweepPoint> sweep_sample(const RBDatabase& db, BoundKind kind) const {
    std::vector<SweepPoint> out;
    out.reserve(cfg_.training_sample.size());
    for (const auto& mu : cfg_.training_sample) {
      SweepPoint sp;
      try {
        const auto ev = evaluate_online(db, mu, cfg_.eps, kind, true);
        sp.relative_bound = ev.relative_bound;
        sp.bound = ev.bound.values.back();
        sp.indicator = cfg_.eps == 0.0 ? beta_indicator(ev.beta_n, ev.constants.beta_ub) : ev.kappa;
      } catch (const InstabilityError&) {
        // singular reduced pair: unbounded error bound, maximal indicator
        sp.unstable = true;
        sp.indicator = cfg_.eps == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
      }
      if (!std::isfinite(sp.relative_bound)) sp.relative_bound = std::numeric_limits<double>::infinity();
      out.push_back(sp);
    }
    return out;
  }

 private:
  template <class F>
  static std::size_t argmax(const std::vector<SweepPoint>& v, F key) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (key(v[i]) > key(v[best])) best = i;  // ties keep the lowest index
    return best;
  }

  static bool contains(const std::vector<Parameter>& set, const Parameter& mu) {
    return std::any_of(set.begin(), set.end(), [&](const Parameter& p) { return p == mu; });
  }

  static double min_relative_distance(const Parameter& mu, const std::vector<Parameter>& a,
                                      const std::vector<Parameter>& b) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto* set : {&a, &b})
      for (const auto& p : *set) d = std::min(d, (mu - p).norm() / p.norm());
    return d;
  }

  // POD of the projection errors of the snapshots k = 1..K; returns the number appended.
  int append_pod(RBSpacePair& spaces, const std::vector<Eigen::VectorXd>& traj, Field which, const Parameter& mu,
                 BasisKind kind) const {
    std::vector<Eigen::VectorXd> err;
    for (std::size_t k = 1; k < traj.size(); ++k) err.push_back(spaces.projection_error(traj[k], which));
    const SpMat& W = which == Field::velocity ? model_->spaces.X_inner : model_->spaces.Y_inner;
    const PodResult pod = detail::pod_impl(err, cfg_.pod_rank, W, true);
    const int M = static_cast<int>(pod.modes.size());
    if (M == 0) return 0;
    std::vector<BasisRecord> rec;
    for (int i = 0; i < M; ++i) rec.push_back({mu, i, kind});
    return spaces.append_basis(pod.modes, which, rec).accepted;
  }

  // Supremizer of the Y-normalized final-time RB pressure at mu*; when that solve breaks down
  // (singular pair) the pressure direction attaining beta_N is used instead.
  bool append_supremizer(RBSpacePair& spaces, const RBDatabase& db, const InnerProducts& ip,
                         const Parameter& mu_star) const {
    const auto& P = spaces.pressure_basis();
    std::vector<Eigen::VectorXd> candidates;
    try {
      const auto tr = solve_rb_online(db, mu_star, cfg_.eps);
      const Eigen::VectorXd pN = tr.p.col(tr.K());
      if (pN.norm() > 0.0) candidates.push_back(P * (pN / pN.norm()));
    } catch (const InstabilityError&) {
    }
    {
      const Eigen::MatrixXd BN = db.op.b.assemble(db.op.b.theta_values(db.coefficients(mu_star)));
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(BN, Eigen::ComputeFullU);
      // the last left singular vector is the pressure direction attaining beta_N
      candidates.push_back(P * svd.matrixU().col(svd.matrixU().cols() - 1));
    }
    for (const auto& q : candidates) {
      const Eigen::VectorXd t = supremizer(*model_, ip, mu_star, q);
      const auto rep = spaces.append_basis({t}, Field::velocity, {{mu_star, db.grid.K, BasisKind::supremizer}});
      if (rep.accepted > 0) return true;
    }
    return false;
  }

  std::shared_ptr<const TruthModel> model_;
  ConstantBounds constants_;
  GreedyConfig cfg_;
  TruthSolver solver_;
};

inline GreedyResult pod_greedy_eps0(std::shared_ptr<const TruthModel> model, const ConstantBounds& constants,
                                    GreedyConfig config) {
  if (config.eps != 0.0) throw ConfigError("pod_greedy_eps0 requires eps = 0");
  return PodGreedy(std::move(model), constants, std::move(config)).run();
}

inline GreedyResult pod_greedy_penalty(std::shared_ptr<const TruthModel> model, const ConstantBounds& constants,
                                       GreedyConfig config) {
  if (!(config.eps > 0.0)) throw ConfigError("pod_greedy_penalty requires eps > 0");
  return PodGreedy(std::move(model), constants, std::move(config)).run();
}

}  // namespace rbstokes
