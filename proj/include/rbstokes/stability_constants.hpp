// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "rbstokes/errors.hpp"
#include "rbstokes/fem_assembly.hpp"
#include "rbstokes/linalg.hpp"
#include "rbstokes/truth_solver.hpp"

namespace rbstokes {

enum class ConstantKind : std::uint8_t { alpha_a = 0, gamma_a, gamma_m, gamma_b, gamma_c, alpha_c, beta };

inline constexpr std::array<ConstantKind, 7> kAllConstantKinds{ConstantKind::alpha_a, ConstantKind::gamma_a,
                                                               ConstantKind::gamma_m, ConstantKind::gamma_b,
                                                               ConstantKind::gamma_c, ConstantKind::alpha_c,
                                                               ConstantKind::beta};

inline const char* to_string(ConstantKind k) {
  switch (k) {
    case ConstantKind::alpha_a: return "alpha_a";
    case ConstantKind::gamma_a: return "gamma_a";
    case ConstantKind::gamma_m: return "gamma_m";
    case ConstantKind::gamma_b: return "gamma_b";
    case ConstantKind::gamma_c: return "gamma_c";
    case ConstantKind::alpha_c: return "alpha_c";
    case ConstantKind::beta: return "beta";
  }
  return "?";
}

// The beta lower bound and both gamma_b bounds come from a training-cell heuristic, all others from
// coefficient-ratio arguments.
inline bool is_heuristic(ConstantKind k) { return k == ConstantKind::beta || k == ConstantKind::gamma_b; }

struct LanczosSettings {
  double tol = 1e-11;
  int max_iter = 600;
};

// Exact (eigen-solver) stability constants of the truth problem.
class ConstantOracle {
 public:
  explicit ConstantOracle(std::shared_ptr<const TruthModel> model, LanczosSettings settings = {})
      : model_(std::move(model)), settings_(settings) {
    x_chol_.compute(model_->spaces.X_inner);
    y_chol_.compute(model_->spaces.Y_inner);
    if (x_chol_.info() != Eigen::Success || y_chol_.info() != Eigen::Success)
      throw NumericalError("inner-product matrices are not positive definite");
  }

  const TruthModel& model() const { return *model_; }

  double exact_constant(ConstantKind kind, const Parameter& mu) const {
    return compute(kind, assemble_at(model_->ops, mu), mu);
  }

  std::array<double, 7> all(const Parameter& mu) const {
    const auto op = assemble_at(model_->ops, mu);
    std::array<double, 7> out{};
    for (auto k : kAllConstantKinds) out[static_cast<std::size_t>(k)] = compute(k, op, mu);
    return out;
  }

  double compute(ConstantKind kind, const AssembledOperators& op, const Parameter& mu) const {
    const auto& X = model_->spaces.X_inner;
    const auto& Y = model_->spaces.Y_inner;
    auto wx = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return X * v; };
    auto wy = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return Y * v; };
    const Eigen::Index nu = X.rows(), np = Y.rows();
    LanczosResult r;
    switch (kind) {
      case ConstantKind::alpha_a: {
        const SpMat As = exact_symmetric(op.A);
        Eigen::SimplicialLDLT<SpMat> chol(As);
        if (chol.info() != Eigen::Success) throw NumericalError("a(.,.;mu) is not positive definite");
        r = run([&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return chol.solve(X * v); }, wx, nu);
        return check(r, kind, mu, 1.0 / r.largest);
      }
      case ConstantKind::gamma_a:
        r = run([&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return x_chol_.solve(op.A * v); }, wx, nu);
        return check(r, kind, mu, r.largest);
      case ConstantKind::gamma_m:
        r = run([&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return x_chol_.solve(op.M * v); }, wx, nu);
        return check(r, kind, mu, r.largest);
      case ConstantKind::gamma_c:
        r = run([&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return y_chol_.solve(op.C * v); }, wy, np);
        return check(r, kind, mu, r.largest);
      case ConstantKind::alpha_c: {
        Eigen::SimplicialLLT<SpMat> chol(op.C);
        if (chol.info() != Eigen::Success) throw NumericalError("c(.,.;mu) is not positive definite");
        r = run([&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return chol.solve(Y * v); }, wy, np);
        return check(r, kind, mu, 1.0 / r.largest);
      }
      case ConstantKind::gamma_b:
        // largest eigenvalue of (B X^{-1} B^T, Y)
        r = run([&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
          return y_chol_.solve(op.B * x_chol_.solve(op.B.transpose() * q));
        }, wy, np);
        return check(r, kind, mu, std::sqrt(r.largest));
      case ConstantKind::beta:
        return beta_with_vector(op, mu, nullptr);
    }
    return 0.0;
  }

  // beta(mu) = 1 / sqrt(largest eigenvalue of S^{-1} Y), S = B X^{-1} B^T, with S^{-1} applied
  // through the saddle system [X B^T; B 0]. Optionally returns the Y-normalized minimizing pressure.
  double beta_with_vector(const AssembledOperators& op, const Parameter& mu, Eigen::VectorXd* q_min) const {
    const auto& X = model_->spaces.X_inner;
    const auto& Y = model_->spaces.Y_inner;
    const Eigen::Index nu = X.rows(), np = Y.rows();
    AssembledOperators sad{X, SpMat(nu, nu), op.B, SpMat(np, np)};
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(saddle_matrix(sad, 1.0, 0.0));
    if (lu.info() != Eigen::Success) throw NumericalError("pressure Schur complement is singular (inf-sup fails)");
    const auto r = lanczos_largest(
        [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
          Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nu + np);
          rhs.tail(np) = -(Y * q);
          return lu.solve(rhs).tail(np);
        },
        [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return Y * v; }, np, settings_.tol, settings_.max_iter,
        12345, q_min != nullptr);
    const double value = check(r, ConstantKind::beta, mu, 1.0 / std::sqrt(r.largest));
    if (q_min) *q_min = r.vector;
    return value;
  }

  // Quadratic form H with sup_v b(v,q;mu)^2 / |v|_X^2 = theta_b(mu)^T H theta_b(mu) for the
  // fixed pressure q (|q|_Y = 1).
  Eigen::MatrixXd supremizer_quadratic(const Eigen::VectorXd& q) const {
    const auto& b = model_->ops.b;
    const Eigen::Index Q = static_cast<Eigen::Index>(b.size());
    std::vector<Eigen::VectorXd> w, t;
    for (const auto& Bq : b.matrices) {
      w.push_back(Bq.transpose() * q);
      t.push_back(x_chol_.solve(w.back()));
    }
    Eigen::MatrixXd H(Q, Q);
    for (Eigen::Index i = 0; i < Q; ++i)
      for (Eigen::Index j = 0; j < Q; ++j) H(i, j) = w[static_cast<std::size_t>(i)].dot(t[static_cast<std::size_t>(j)]);
    return 0.5 * (H + H.transpose());
  }

  // X-Riesz representer of b(., q; mu): X t = B^T q.
  Eigen::VectorXd supremizer(const SpMat& B, const Eigen::VectorXd& q) const { return x_chol_.solve(B.transpose() * q); }
  const Eigen::SimplicialLDLT<SpMat>& x_factor() const { return x_chol_; }
  const Eigen::SimplicialLDLT<SpMat>& y_factor() const { return y_chol_; }

 private:
  LanczosResult run(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& op,
                    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& w, Eigen::Index n) const {
    return lanczos_largest(op, w, n, settings_.tol, settings_.max_iter);
  }
  static double check(const LanczosResult& r, ConstantKind kind, const Parameter& mu, double value) {
    if (!r.converged || !std::isfinite(value) || !(value > 0.0))
      throw NumericalError(std::string("eigen solver did not converge for ") + to_string(kind) + " at mu=(" +
                           format_parameter(mu) + "): " + std::to_string(r.iterations) + " iterations, residual " +
                           std::to_string(r.residual));
    return value;
  }

  std::shared_ptr<const TruthModel> model_;
  LanczosSettings settings_;
  Eigen::SimplicialLDLT<SpMat> x_chol_;
  Eigen::SimplicialLDLT<SpMat> y_chol_;
};

struct BoundConstants {
  double alpha_a_lb = 0, alpha_a_ub = 0;
  double gamma_a_lb = 0, gamma_a_ub = 0;
  double gamma_m_lb = 0, gamma_m_ub = 0;
  double beta_lb = 0, beta_ub = 0;
  double alpha_c_lb = 0, alpha_c_ub = 0;
  double gamma_b_lb = 0, gamma_b_ub = 0;
  double gamma_c_lb = 0, gamma_c_ub = 0;
  bool beta_heuristic = true;
  std::string mode = "bounded";  // "bounded" or "exact"

  std::pair<double, double> range(ConstantKind k) const {
    switch (k) {
      case ConstantKind::alpha_a: return {alpha_a_lb, alpha_a_ub};
      case ConstantKind::gamma_a: return {gamma_a_lb, gamma_a_ub};
      case ConstantKind::gamma_m: return {gamma_m_lb, gamma_m_ub};
      case ConstantKind::gamma_b: return {gamma_b_lb, gamma_b_ub};
      case ConstantKind::gamma_c: return {gamma_c_lb, gamma_c_ub};
      case ConstantKind::alpha_c: return {alpha_c_lb, alpha_c_ub};
      case ConstantKind::beta: return {beta_lb, beta_ub};
    }
    return {0, 0};
  }
  void set(ConstantKind k, double lb, double ub) {
    switch (k) {
      case ConstantKind::alpha_a: alpha_a_lb = lb; alpha_a_ub = ub; break;
      case ConstantKind::gamma_a: gamma_a_lb = lb; gamma_a_ub = ub; break;
      case ConstantKind::gamma_m: gamma_m_lb = lb; gamma_m_ub = ub; break;
      case ConstantKind::gamma_b: gamma_b_lb = lb; gamma_b_ub = ub; break;
      case ConstantKind::gamma_c: gamma_c_lb = lb; gamma_c_ub = ub; break;
      case ConstantKind::alpha_c: alpha_c_lb = lb; alpha_c_ub = ub; break;
      case ConstantKind::beta: beta_lb = lb; beta_ub = ub; break;
    }
  }
  // Label recorded with every bound: which constants produced it.
  std::string label() const {
    if (mode == "exact") return "exact";
    return beta_heuristic ? "bounded+heuristic_beta" : "bounded";
  }
};

inline BoundConstants exact_bound_constants(const std::array<double, 7>& exact) {
  BoundConstants b;
  for (auto k : kAllConstantKinds) b.set(k, exact[static_cast<std::size_t>(k)], exact[static_cast<std::size_t>(k)]);
  b.beta_heuristic = false;
  b.mode = "exact";
  return b;
}

// One training row: parameter, exact constants and the coefficient snapshot
// (|det|, G11, G22, G12 per subdomain) the ratio bounds need.
struct ConstantTrainingPoint {
  Parameter mu;
  std::array<double, 7> exact{};
  std::vector<std::array<double, 4>> theta;  // per subdomain
  Eigen::MatrixXd beta_quadratic;            // supremizer_quadratic of the minimizing pressure
};

inline std::vector<std::array<double, 4>> theta_snapshot(const AffineGeometry& geo, const Parameter& mu) {
  std::vector<std::array<double, 4>> out;
  for (const auto& c : subdomain_coefficients(geo.evaluate_affine_maps(mu)))
    out.push_back({c.abs_det, c.G(0, 0), c.G(1, 1), c.G(0, 1)});
  return out;
}

struct ConstantTrainingReport {
  std::array<double, 7> max_gap{};  // max (ub - lb) / ub over the check sample
  double tolerance = 0.0;
  bool tolerance_met = false;
  std::vector<std::string> notes;
};

// Online-cheap lower/upper bounds from a trained table.
//  - alpha_a, gamma_a: a(v,v;mu) is bracketed by min/max over subdomains of the generalized
//    eigenvalues of (G_s(mu), G_s(mu')) times a(v,v;mu'); combined with the exact value at mu'
//    and optimized over the training set. gamma_a is also capped by max_s lambda_max(G_s(mu)).
//  - gamma_m, alpha_c, gamma_c: same with the ratios |det_s(mu)| / |det_s(mu')|.
//  - beta upper bound: the inf-sup quotient of each stored minimizing pressure evaluated at mu
//    (an upper bound of an infimum), minimized over the training set.
//  - beta lower bound, gamma_b (no coefficient structure): 0.9 * min and max / 0.9 of the exact
//    values at the corners of the training-grid cell containing mu (or of the whole set if it is
//    not a grid); flagged heuristic.
class ConstantBounds {
 public:
  ConstantBounds() = default;
  ConstantBounds(std::shared_ptr<const AffineGeometry> geometry, std::vector<Theta> b_thetas,
                 std::vector<ConstantTrainingPoint> points)
      : geometry_(std::move(geometry)), b_thetas_(std::move(b_thetas)), points_(std::move(points)) {
    detect_grid();
  }

  bool trained() const { return !points_.empty() && geometry_ != nullptr; }
  const std::vector<ConstantTrainingPoint>& points() const { return points_; }
  const AffineGeometry& geometry() const { return *geometry_; }
  std::shared_ptr<const AffineGeometry> geometry_ptr() const { return geometry_; }
  const std::vector<Theta>& b_thetas() const { return b_thetas_; }

  static double heuristic_factor() { return 0.9; }

  BoundConstants bound_constants_at(const Parameter& mu) const {
    if (!trained()) throw UsageError("constant bounds requested before training");
    const auto th = theta_snapshot(*geometry_, mu);
    BoundConstants out;
    out.mode = "bounded";
    out.beta_heuristic = true;
    for (auto kind : kAllConstantKinds) {
      if (is_heuristic(kind)) {
        auto [lb, ub] = heuristic_range(kind, mu);
        // at a training point the exact beta is already stored
        if (kind == ConstantKind::beta && !is_training_point(mu)) ub = beta_upper(mu);
        out.set(kind, lb, ub);
        continue;
      }
      double lb = 0.0, ub = std::numeric_limits<double>::infinity();
      for (const auto& p : points_) {
        const auto [rlo, rhi] = ratio_range(kind, th, p.theta);
        const double v = p.exact[static_cast<std::size_t>(kind)];
        lb = std::max(lb, rlo * v);
        ub = std::min(ub, rhi * v);
      }
      // X dominates the reference Dirichlet form, so a <= max_s lambda_max(G_s) |v|_X^2
      if (kind == ConstantKind::gamma_a) {
        double g = 0.0;
        for (const auto& t : th) {
          Eigen::Matrix2d G;
          G << t[1], t[3], t[3], t[2];
          g = std::max(g, symmetric_extremes(G).second);
        }
        ub = std::min(ub, g);
      }
      out.set(kind, lb, ub);
    }
    return out;
  }

 private:
  // [min, max] over subdomains of the coefficient ratios between mu and a training point.
  static std::pair<double, double> ratio_range(ConstantKind kind, const std::vector<std::array<double, 4>>& th,
                                               const std::vector<std::array<double, 4>>& tp) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t s = 0; s < th.size(); ++s) {
      if (kind == ConstantKind::alpha_a || kind == ConstantKind::gamma_a) {
        Eigen::Matrix2d Gm, Gp;
        Gm << th[s][1], th[s][3], th[s][3], th[s][2];
        Gp << tp[s][1], tp[s][3], tp[s][3], tp[s][2];
        const Eigen::Vector2d l = pencil_eigs_2x2(Gm, Gp);
        lo = std::min(lo, l[0]);
        hi = std::max(hi, l[1]);
      } else {
        const double r = th[s][0] / tp[s][0];
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
    }
    return {lo, hi};
  }

  bool is_training_point(const Parameter& mu) const {
    return std::any_of(points_.begin(), points_.end(), [&](const auto& p) { return p.mu == mu; });
  }

  double beta_upper(const Parameter& mu) const {
    const auto coeffs = subdomain_coefficients(geometry_->evaluate_affine_maps(mu));
    Eigen::VectorXd th(static_cast<Eigen::Index>(b_thetas_.size()));
    for (std::size_t q = 0; q < b_thetas_.size(); ++q) th[static_cast<Eigen::Index>(q)] = b_thetas_[q](coeffs);
    double ub = std::numeric_limits<double>::infinity();
    for (const auto& p : points_) ub = std::min(ub, std::sqrt(std::max(0.0, th.dot(p.beta_quadratic * th))));
    return ub;
  }

  void detect_grid() {
    axes_.clear();
    if (points_.empty()) return;
    const Eigen::Index d = points_.front().mu.size();
    std::size_t total = 1;
    for (Eigen::Index i = 0; i < d; ++i) {
      std::set<double> vals;
      for (const auto& p : points_) vals.insert(p.mu[i]);
      axes_.emplace_back(vals.begin(), vals.end());
      total *= vals.size();
    }
    if (total != points_.size()) {
      axes_.clear();
      return;
    }
    for (const auto& p : points_) grid_index_[key(p.mu)] = &p - points_.data();
    if (grid_index_.size() != points_.size()) {
      axes_.clear();
      grid_index_.clear();
    }
  }

  static std::vector<double> key(const Parameter& mu) { return {mu.data(), mu.data() + mu.size()}; }

  std::pair<double, double> heuristic_range(ConstantKind kind, const Parameter& mu) const {
    const auto idx = static_cast<std::size_t>(kind);
    for (const auto& p : points_)
      if (p.mu == mu) return {p.exact[idx], p.exact[idx]};
    std::vector<const ConstantTrainingPoint*> cell;
    if (!axes_.empty()) {
      // corners of the grid cell containing mu (clamped to the grid's bounding box)
      const std::size_t d = axes_.size();
      std::vector<std::pair<double, double>> bracket(d);
      for (std::size_t i = 0; i < d; ++i) {
        const auto& ax = axes_[i];
        const double x = mu[static_cast<Eigen::Index>(i)];
        if (ax.size() == 1) {
          bracket[i] = {ax[0], ax[0]};
          continue;
        }
        auto it = std::upper_bound(ax.begin(), ax.end(), x);
        std::size_t hi = static_cast<std::size_t>(it - ax.begin());
        hi = std::clamp<std::size_t>(hi, 1, ax.size() - 1);
        bracket[i] = {ax[hi - 1], ax[hi]};
      }
      for (std::size_t c = 0; c < (std::size_t{1} << d); ++c) {
        std::vector<double> corner(d);
        for (std::size_t i = 0; i < d; ++i) corner[i] = ((c >> i) & 1) ? bracket[i].second : bracket[i].first;
        auto it = grid_index_.find(corner);
        if (it != grid_index_.end()) cell.push_back(&points_[it->second]);
      }
    }
    if (cell.empty())
      for (const auto& p : points_) cell.push_back(&p);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto* p : cell) {
      lo = std::min(lo, p->exact[idx]);
      hi = std::max(hi, p->exact[idx]);
    }
    return {heuristic_factor() * lo, hi / heuristic_factor()};
  }

  std::shared_ptr<const AffineGeometry> geometry_;
  std::vector<Theta> b_thetas_;
  std::vector<ConstantTrainingPoint> points_;
  std::vector<std::vector<double>> axes_;
  std::map<std::vector<double>, std::size_t> grid_index_;
};

// Computes exact constants on the training set and measures the bound gap on a check sample
// (the training set itself gives zero gap by construction).
inline std::pair<ConstantBounds, ConstantTrainingReport> train_constant_bounds(
    const ConstantOracle& oracle, const std::vector<Parameter>& training_set, double tolerance,
    const std::vector<Parameter>& check_sample = {}) {
  if (training_set.empty()) throw ConfigError("constant training needs a nonempty training set");
  const auto& geo = *oracle.model().ops.geometry;
  std::vector<ConstantTrainingPoint> pts;
  for (const auto& mu : training_set) {
    ConstantTrainingPoint p;
    p.mu = mu;
    const auto op = assemble_at(oracle.model().ops, mu);
    for (auto k : kAllConstantKinds)
      if (k != ConstantKind::beta) p.exact[static_cast<std::size_t>(k)] = oracle.compute(k, op, mu);
    Eigen::VectorXd qmin;
    p.exact[static_cast<std::size_t>(ConstantKind::beta)] = oracle.beta_with_vector(op, mu, &qmin);
    p.beta_quadratic = oracle.supremizer_quadratic(qmin);
    p.theta = theta_snapshot(geo, mu);
    pts.push_back(std::move(p));
  }
  ConstantBounds bounds(oracle.model().ops.geometry, oracle.model().ops.b.thetas, std::move(pts));
  ConstantTrainingReport rep;
  rep.tolerance = tolerance;
  rep.max_gap.fill(0.0);
  const auto& sample = check_sample.empty() ? training_set : check_sample;
  for (const auto& mu : sample) {
    const auto bc = bounds.bound_constants_at(mu);
    for (auto k : kAllConstantKinds) {
      const auto [lb, ub] = bc.range(k);
      auto& g = rep.max_gap[static_cast<std::size_t>(k)];
      g = std::max(g, (ub - lb) / ub);
    }
  }
  rep.tolerance_met = true;
  for (auto k : kAllConstantKinds) {
    if (rep.max_gap[static_cast<std::size_t>(k)] > tolerance) {
      rep.tolerance_met = false;
      rep.notes.push_back(std::string(to_string(k)) + ": max relative gap " +
                          std::to_string(rep.max_gap[static_cast<std::size_t>(k)]) + " exceeds tolerance" +
                          (is_heuristic(k) ? " (heuristic bound)" : " (rigorous bound kept)"));
    }
  }
  return {std::move(bounds), std::move(rep)};
}

}  // namespace rbstokes
