// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rbstokes/database_io.hpp"
#include "rbstokes/error_estimation.hpp"
#include "rbstokes/io.hpp"
#include "rbstokes/sampling.hpp"
#include "rbstokes/stability_constants.hpp"
#include "rbstokes/truth_solver.hpp"

namespace rbstokes {

// Every knob of a train/bench run. All keys are optional in the config file; the full set,
// defaults included, is written into every manifest.
struct RunConfig {
  int resolution = 4;  // 4688 velocity + 661 pressure dofs
  double T = 1.0;
  int K = 100;
  double eps = 0.0;
  double tol = 1e-3;
  double beta_tol = 0.1;
  double kappa_tol = 1e3;
  int pod_rank = 2;
  int mu_1_index = 0;
  int max_outer = 60;
  int max_inner = 20;
  int max_stagnant = 3;
  double proximity = 1e-3;
  int training_size = 512;
  std::uint64_t training_seed = 1;
  int constants_grid = 3;
  double constants_tolerance = 0.5;
  int constants_check = 25;
  std::uint64_t constants_seed = 2;
  int bench_samples = 25;
  std::uint64_t bench_seed = 7;
  std::string domain_lower = "0.5,0.5";
  std::string domain_upper = "1.5,1.5";

  io::KeyValues key_values() const {
    return {{"resolution", std::to_string(resolution)},
            {"T", io::fmt(T)},
            {"K", std::to_string(K)},
            {"eps", io::fmt(eps)},
            {"tol", io::fmt(tol)},
            {"beta_tol", io::fmt(beta_tol)},
            {"kappa_tol", io::fmt(kappa_tol)},
            {"pod_rank", std::to_string(pod_rank)},
            {"mu_1_index", std::to_string(mu_1_index)},
            {"max_outer", std::to_string(max_outer)},
            {"max_inner", std::to_string(max_inner)},
            {"max_stagnant", std::to_string(max_stagnant)},
            {"proximity", io::fmt(proximity)},
            {"training_size", std::to_string(training_size)},
            {"training_seed", std::to_string(training_seed)},
            {"constants_grid", std::to_string(constants_grid)},
            {"constants_tolerance", io::fmt(constants_tolerance)},
            {"constants_check", std::to_string(constants_check)},
            {"constants_seed", std::to_string(constants_seed)},
            {"bench_samples", std::to_string(bench_samples)},
            {"bench_seed", std::to_string(bench_seed)},
            {"domain_lower", domain_lower},
            {"domain_upper", domain_upper}};
  }

  std::string digest() const { return io::hex64(io::fnv1a(io::format_key_values(key_values()))); }

  void set(const std::string& key, const std::string& value) {
    auto num = [&](auto& field) {
      using F = std::decay_t<decltype(field)>;
      try {
        std::size_t used = 0;
        if constexpr (std::is_same_v<F, double>)
          field = std::stod(value, &used);
        else if constexpr (std::is_same_v<F, int>)
          field = std::stoi(value, &used);
        else
          field = static_cast<F>(std::stoull(value, &used));
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
      }
    };
    if (key == "resolution") num(resolution);
    else if (key == "T") num(T);
    else if (key == "K") num(K);
    else if (key == "eps") num(eps);
    else if (key == "tol") num(tol);
    else if (key == "beta_tol") num(beta_tol);
    else if (key == "kappa_tol") num(kappa_tol);
    else if (key == "pod_rank") num(pod_rank);
    else if (key == "mu_1_index") num(mu_1_index);
    else if (key == "max_outer") num(max_outer);
    else if (key == "max_inner") num(max_inner);
    else if (key == "max_stagnant") num(max_stagnant);
    else if (key == "proximity") num(proximity);
    else if (key == "training_size") num(training_size);
    else if (key == "training_seed") num(training_seed);
    else if (key == "constants_grid") num(constants_grid);
    else if (key == "constants_tolerance") num(constants_tolerance);
    else if (key == "constants_check") num(constants_check);
    else if (key == "constants_seed") num(constants_seed);
    else if (key == "bench_samples") num(bench_samples);
    else if (key == "bench_seed") num(bench_seed);
    else if (key == "domain_lower") domain_lower = value;
    else if (key == "domain_upper") domain_upper = value;
    else throw ConfigError("unknown config key '" + key + "'");
  }

  static RunConfig from_text(const std::string& text, const std::string& what) {
    RunConfig c;
    for (const auto& [k, v] : io::parse_key_values(text, what)) c.set(k, v);
    c.validate();
    return c;
  }

  void validate() const {
    if (resolution < 1) throw ConfigError("resolution must be >= 1");
    if (!(eps >= 0.0)) throw ConfigError("eps must be >= 0");
    if (training_size < 1) throw ConfigError("training_size must be >= 1");
    if (mu_1_index < 0 || mu_1_index >= training_size) throw ConfigError("mu_1_index must index the training sample");
    if (constants_grid < 1) throw ConfigError("constants_grid must be >= 1");
    if (bench_samples < 1) throw ConfigError("bench_samples must be >= 1");
    TimeGrid(T, K);
    domain();
  }

  ParameterDomain domain() const { return ParameterDomain(parse_parameter(domain_lower), parse_parameter(domain_upper)); }
  TimeGrid grid() const { return TimeGrid(T, K); }

  GreedyConfig greedy() const {
    GreedyConfig g;
    g.training_sample = domain().random_sample(static_cast<std::size_t>(training_size), training_seed);
    g.tol = tol;
    g.eps = eps;
    g.stab_tol = eps > 0.0 ? kappa_tol : beta_tol;
    g.pod_rank = pod_rank;
    g.mu_1_index = static_cast<std::size_t>(mu_1_index);
    g.max_outer = max_outer;
    g.max_inner = max_inner;
    g.max_stagnant = max_stagnant;
    g.proximity = proximity;
    return g;
  }
};

inline std::shared_ptr<const TruthModel> make_model(const RunConfig& c) {
  return make_truth_model(generate_reference_mesh(c.resolution),
                          std::make_shared<const AffineGeometry>(make_channel_geometry(c.domain())), c.grid());
}

inline std::pair<ConstantBounds, ConstantTrainingReport> train_constants(const ConstantOracle& oracle,
                                                                         const RunConfig& c) {
  const auto dom = c.domain();
  return train_constant_bounds(oracle, dom.tensor_grid(c.constants_grid), c.constants_tolerance,
                               dom.random_sample(static_cast<std::size_t>(c.constants_check), c.constants_seed));
}

// ---------------------------------------------------------------------------------------------
// CSV output

inline std::string mu_columns(Eigen::Index dim) {
  std::string s;
  for (Eigen::Index i = 0; i < dim; ++i) s += "mu" + std::to_string(i + 1) + ",";
  return s;
}

inline std::string mu_values(const Parameter& mu) {
  std::string s;
  for (Eigen::Index i = 0; i < mu.size(); ++i) s += io::fmt(mu[i]) + ",";
  return s;
}

// One row per stabilization step and one per outer-iteration exit.
inline std::string trace_csv(const GreedyTrace& tr) {
  const Eigen::Index dim = tr.iterations.empty() ? 2 : tr.iterations.front().mu_N.size();
  std::string s = "iteration," + mu_columns(dim) + "bound,indicator,action,N_X,N_Y\n";
  for (const auto& it : tr.iterations) {
    for (const auto& e : it.events)
      s += std::to_string(it.N) + "," + mu_values(e.mu_source) + "," + io::fmt(e.indicator) + "," + to_string(e.action) +
           "," + std::to_string(e.NX) + "," + std::to_string(e.NY) + "\n";
    s += std::to_string(it.N) + "," + mu_values(it.mu_N) + io::fmt(it.max_relative_bound) + "," +
         io::fmt(it.max_indicator) + "," + (it.stabilized ? "outer" : "outer_unstabilized") + "," +
         std::to_string(it.NX) + "," + std::to_string(it.NY) + "\n";
  }
  return s;
}

// Basis sizes at the outer-iteration exits, "nx:ny" separated by spaces (manifest field n_cuts).
inline std::string n_cuts_field(const GreedyTrace& tr) {
  std::string s;
  for (const auto& it : tr.iterations) s += (s.empty() ? "" : " ") + std::to_string(it.NX) + ":" + std::to_string(it.NY);
  return s;
}

inline std::vector<std::pair<int, int>> parse_n_cuts(const std::string& field) {
  std::vector<std::pair<int, int>> out;
  std::istringstream in(field);
  std::string tok;
  while (in >> tok) {
    const auto c = tok.find(':');
    if (c == std::string::npos) throw SchemaError("manifest: field 'n_cuts' has a malformed entry '" + tok + "'");
    try {
      out.emplace_back(std::stoi(tok.substr(0, c)), std::stoi(tok.substr(c + 1)));
    } catch (const std::exception&) {
      throw SchemaError("manifest: field 'n_cuts' has a malformed entry '" + tok + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Benchmark

inline const std::vector<int>& bench_time_levels() {
  static const std::vector<int> k{10, 20, 40, 60, 80, 100};
  return k;
}

struct BenchSample {
  std::size_t index = 0;
  Parameter mu;
  int NX = 0, NY = 0;
  BoundKind kind = BoundKind::sym;
  std::vector<double> error, bound, truth_norm;  // k = 0..K, energy norm of the error / bound
  double truth_seconds = 0.0;
};

struct BenchRow {
  int NX = 0, NY = 0;
  BoundKind kind = BoundKind::sym;
  int k = 0;
  double max_rel_error = 0.0, max_rel_bound = 0.0;
  double max_eff = 0.0, min_eff = std::numeric_limits<double>::infinity(), median_eff = 0.0;
};

struct TimingRow {
  int NX = 0, NY = 0;
  double truth_ms = 0.0, online_solve_ms = 0.0, sym_bound_ms = 0.0, nonsym_bound_ms = 0.0,
         penalty_bound_ms = 0.0;
  double speedup() const {
    const double online = online_solve_ms + (penalty_bound_ms > 0.0 ? penalty_bound_ms : sym_bound_ms);
    return online > 0.0 ? truth_ms / online : std::numeric_limits<double>::infinity();
  }
};

struct BenchReport {
  double eps = 0.0;
  std::string constants_mode;
  std::string normalization = "truth";  // relative errors and bounds divide by the truth norms
  std::vector<BenchSample> samples;
  std::vector<BenchRow> rows;
  TimingRow timing;
  int violations = 0;  // k in 1..K where bound < error
  int checked = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class F>
double median_ms(int reps, F&& f) {
  std::vector<double> t;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return median(t);
}

// Truth vs RB over `mus` at each basis cut. The database must hold its truth bases.
inline BenchReport run_bench(const TruthModel& model, const RBDatabase& db, const std::vector<Parameter>& mus,
                             std::vector<std::pair<int, int>> cuts, int timing_reps = 5) {
  if (db.velocity_basis.cols() != db.NX || db.pressure_basis.cols() != db.NY)
    throw UsageError("bench needs a database saved with its bases (--with-basis)");
  if (cuts.empty()) cuts.emplace_back(db.NX, db.NY);
  BenchReport rep;
  rep.eps = db.eps;
  const double eps = db.eps, dt = db.grid.dt();
  const int K = db.grid.K;
  const std::vector<BoundKind> kinds =
      eps > 0.0 ? std::vector<BoundKind>{BoundKind::penalty} : std::vector<BoundKind>{BoundKind::sym, BoundKind::nonsym};
  TruthSolver solver(std::shared_ptr<const TruthModel>(&model, [](const TruthModel*) {}));
  std::vector<RBDatabase> dbs;
  for (const auto& [nx, ny] : cuts) dbs.push_back(truncate_database(db, nx, ny));

  for (std::size_t i = 0; i < mus.size(); ++i) {
    const auto& mu = mus[i];
    const auto t0 = std::chrono::steady_clock::now();
    const Trajectory truth = solver.solve(mu, eps);
    const double ts = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto op = assemble_at(model.ops, mu);
    const auto tn = energy_norms(truth.velocity, truth.pressure, eps, op, dt, K);
    for (const auto& d : dbs) {
      const auto ev = evaluate_online(d, mu, eps, kinds.front(), false);
      const auto rec = reconstruct(ev.traj, d.velocity_basis, d.pressure_basis);
      const auto err = trajectory_error(truth, rec);
      const auto en = energy_norms(err.velocity, err.pressure, eps, op, dt, K);
      for (auto kind : kinds) {
        BenchSample s;
        s.index = i;
        s.mu = mu;
        s.NX = d.NX;
        s.NY = d.NY;
        s.kind = kind;
        s.truth_seconds = ts;
        const auto b = compute_bound(kind, ev.norms, ev.constants, dt, eps, K);
        s.bound = b.values;
        s.error = eps > 0.0 ? en.l2_Z : en.l2_X;
        s.truth_norm = eps > 0.0 ? tn.l2_Z : tn.l2_X;
        rep.constants_mode = b.constants_mode();
        for (int k = 1; k <= K; ++k) {
          ++rep.checked;
          if (s.bound[static_cast<std::size_t>(k)] < s.error[static_cast<std::size_t>(k)]) ++rep.violations;
        }
        rep.samples.push_back(std::move(s));
      }
    }
  }

  for (const auto& d : dbs)
    for (auto kind : kinds)
      for (int k : bench_time_levels()) {
        if (k > K) continue;
        BenchRow row;
        row.NX = d.NX;
        row.NY = d.NY;
        row.kind = kind;
        row.k = k;
        std::vector<double> effs;
        for (const auto& s : rep.samples) {
          if (s.NX != d.NX || s.NY != d.NY || s.kind != kind) continue;
          const auto kk = static_cast<std::size_t>(k);
          const double n = s.truth_norm[kk];
          row.max_rel_error = std::max(row.max_rel_error, n > 0.0 ? s.error[kk] / n : 0.0);
          row.max_rel_bound = std::max(row.max_rel_bound, n > 0.0 ? s.bound[kk] / n : 0.0);
          const double e = effectivity(s.bound[kk], s.error[kk]);
          effs.push_back(e);
          row.max_eff = std::max(row.max_eff, e);
          row.min_eff = std::min(row.min_eff, e);
        }
        row.median_eff = median(effs);
        rep.rows.push_back(row);
      }

  // timing at the largest cut and the first sample, warm
  if (!mus.empty()) {
    const auto& mu = mus.front();
    const auto& d = dbs.back();
    TimingRow& t = rep.timing;
    t.NX = d.NX;
    t.NY = d.NY;
    t.truth_ms = median_ms(timing_reps, [&] { (void)solver.solve(mu, eps); });
    ReducedTrajectory traj;
    std::vector<SubdomainCoefficients> coeffs;
    t.online_solve_ms = median_ms(timing_reps, [&] {
      coeffs = d.coefficients(mu);
      traj = solve_rb_online(d, reduced_system(d, coeffs), mu, eps);
    });
    auto bound_ms = [&](BoundKind kind) {
      return median_ms(timing_reps, [&] {
        const auto n = residual_norms_online(d, traj, d.coefficients(mu), eps);
        (void)compute_bound(kind, n, d.constants.bound_constants_at(mu), dt, eps, K);
      });
    };
    if (eps > 0.0) {
      t.penalty_bound_ms = bound_ms(BoundKind::penalty);
    } else {
      t.sym_bound_ms = bound_ms(BoundKind::sym);
      t.nonsym_bound_ms = bound_ms(BoundKind::nonsym);
    }
  }
  return rep;
}

inline std::string bench_effectivity_csv(const BenchReport& r) {
  std::string s = "N_X,N_Y,bound,constants_mode,normalization,k,max_rel_error,max_rel_bound,max_effectivity,"
                  "min_effectivity,median_effectivity\n";
  for (const auto& row : r.rows)
    s += std::to_string(row.NX) + "," + std::to_string(row.NY) + "," + to_string(row.kind) + "," + r.constants_mode +
         "," + r.normalization + "," + std::to_string(row.k) + "," + io::fmt(row.max_rel_error) + "," +
         io::fmt(row.max_rel_bound) + "," + io::fmt(row.max_eff) + "," + io::fmt(row.min_eff) + "," +
         io::fmt(row.median_eff) + "\n";
  return s;
}

inline std::string bench_samples_csv(const BenchReport& r) {
  const Eigen::Index dim = r.samples.empty() ? 2 : r.samples.front().mu.size();
  std::string s = "sample," + mu_columns(dim) + "N_X,N_Y,bound,constants_mode,k,error,bound_value,effectivity\n";
  for (const auto& x : r.samples)
    for (int k : bench_time_levels()) {
      if (k >= static_cast<int>(x.error.size())) continue;
      const auto kk = static_cast<std::size_t>(k);
      s += std::to_string(x.index) + "," + mu_values(x.mu) + std::to_string(x.NX) + "," + std::to_string(x.NY) + "," +
           to_string(x.kind) + "," + r.constants_mode + "," + std::to_string(k) + "," + io::fmt(x.error[kk]) + "," +
           io::fmt(x.bound[kk]) + "," + io::fmt(effectivity(x.bound[kk], x.error[kk])) + "\n";
    }
  return s;
}

// Wall times vary between runs; kept out of the reproducible tables.
inline std::string bench_timing_csv(const BenchReport& r) {
  const auto& t = r.timing;
  return "N_X,N_Y,truth_solve_ms,online_solve_ms,sym_bound_ms,nonsym_bound_ms,penalty_bound_ms,speedup,method\n" +
         std::to_string(t.NX) + "," + std::to_string(t.NY) + "," + io::fmt(t.truth_ms) + "," +
         io::fmt(t.online_solve_ms) + "," + io::fmt(t.sym_bound_ms) + "," + io::fmt(t.nonsym_bound_ms) + "," +
         io::fmt(t.penalty_bound_ms) + "," + io::fmt(t.speedup()) + ",median_of_5_warm\n";
}

// Evenly spread outer-iteration cuts, always including the final one.
inline std::vector<std::pair<int, int>> pick_cuts(const std::vector<std::pair<int, int>>& all, std::size_t count) {
  if (all.size() <= count) return all;
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 1; i <= count; ++i) out.push_back(all[(i * all.size()) / count - 1]);
  return out;
}

// ---------------------------------------------------------------------------------------------
// Whole runs with their on-disk artifacts

struct TrainOutcome {
  GreedyResult result;
  ConstantTrainingReport constants_report;
  double constants_seconds = 0.0, greedy_seconds = 0.0;
};

inline std::string constants_report_csv(const ConstantTrainingReport& r) {
  std::string s = "constant,max_relative_gap,tolerance,heuristic,within_tolerance\n";
  for (auto k : kAllConstantKinds) {
    const double g = r.max_gap[static_cast<std::size_t>(k)];
    s += std::string(to_string(k)) + "," + io::fmt(g) + "," + io::fmt(r.tolerance) + "," +
         (is_heuristic(k) ? "1" : "0") + "," + (g <= r.tolerance ? "1" : "0") + "\n";
  }
  return s;
}

inline io::KeyValues config_manifest_entries(const RunConfig& c) {
  io::KeyValues kv;
  for (const auto& [k, v] : c.key_values()) kv.emplace_back("config." + k, v);
  kv.emplace_back("config_digest", c.digest());
  return kv;
}

inline RunConfig config_from_manifest(const std::map<std::string, std::string>& m) {
  RunConfig c;
  bool any = false;
  for (const auto& [k, v] : m)
    if (k.rfind("config.", 0) == 0) {
      try {
        c.set(k.substr(7), v);
      } catch (const ConfigError& e) {
        throw SchemaError(std::string("manifest: field '") + k + "': " + e.what());
      }
      any = true;
    }
  if (!any) throw SchemaError("manifest: no config.* fields, cannot rebuild the truth model");
  const auto it = m.find("config_digest");
  if (it == m.end()) throw SchemaError("manifest: missing field 'config_digest'");
  if (it->second != c.digest()) throw SchemaError("manifest: field 'config_digest' does not match the config.* fields");
  return c;
}

// Truth model of a trained database; the mesh digest in the manifest must match.
inline std::shared_ptr<const TruthModel> model_for_database(const std::filesystem::path& dir, const RBDatabase& db) {
  const auto c = config_from_manifest(read_manifest(dir));
  auto model = make_model(c);
  if (mesh_digest(generate_reference_mesh(c.resolution)) != db.mesh_digest)
    throw SchemaError("manifest: field 'mesh_digest' does not match the mesh of config.resolution");
  return model;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Constants, greedy and all artifacts under `out`: the database (with bases unless told
// otherwise), trace.csv, constants_report.csv and timing.csv. Wall times live only in
// timing.csv so every other file is reproducible from the config.
inline TrainOutcome train_to_dir(const RunConfig& c, const std::filesystem::path& out, bool with_basis = true) {
  c.validate();
  const auto model = make_model(c);
  auto t0 = std::chrono::steady_clock::now();
  const ConstantOracle oracle(model);
  auto [bounds, report] = train_constants(oracle, c);
  const double constants_seconds = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const auto gc = c.greedy();
  TrainOutcome o{c.eps > 0.0 ? pod_greedy_penalty(model, bounds, gc) : pod_greedy_eps0(model, bounds, gc), report,
                 constants_seconds, seconds_since(t0)};
  const auto& tr = o.result.trace;

  auto extra = config_manifest_entries(c);
  extra.emplace_back("algorithm", tr.algorithm);
  extra.emplace_back("converged", tr.converged ? "1" : "0");
  extra.emplace_back("outer_iterations", std::to_string(tr.iterations.size()));
  extra.emplace_back("final_max_relative_bound",
                     tr.iterations.empty() ? "inf" : io::fmt(tr.iterations.back().max_relative_bound));
  extra.emplace_back("stabilization_events", std::to_string(tr.stabilization_events()));
  extra.emplace_back("unstabilized_exits", std::to_string(tr.unstabilized_exits()));
  extra.emplace_back("constants_tolerance_met", report.tolerance_met ? "1" : "0");
  extra.emplace_back("constants_mode", tr.constants_mode);
  extra.emplace_back("trace_note", tr.note);
  extra.emplace_back("n_cuts", n_cuts_field(tr));
  save_database(o.result.database, out, with_basis, extra);
  io::write_file(out / "trace.csv", trace_csv(tr));
  io::write_file(out / "constants_report.csv", constants_report_csv(report));
  io::write_file(out / "timing.csv", "stage,seconds\nconstants," + io::fmt(o.constants_seconds) + "\ngreedy," +
                                         io::fmt(o.greedy_seconds) + "\n");
  return o;
}

// Benchmark of a trained database directory; writes effectivity.csv, samples.csv, timing.csv and
// manifest.txt under `out`. `cut_count` evenly spread outer-iteration cuts are evaluated.
inline BenchReport bench_to_dir(const std::filesystem::path& db_dir, const std::filesystem::path& out, int samples,
                                std::uint64_t seed, std::size_t cut_count = 4) {
  if (samples < 1) throw ConfigError("bench needs at least one sample");
  const auto db = load_database(db_dir);
  const auto man = read_manifest(db_dir);
  const auto model = model_for_database(db_dir, db);
  const auto it = man.find("n_cuts");
  const auto cuts = pick_cuts(it == man.end() ? std::vector<std::pair<int, int>>{} : parse_n_cuts(it->second), cut_count);
  const auto mus = db.geometry->domain().random_sample(static_cast<std::size_t>(samples), seed);
  const auto rep = run_bench(*model, db, mus, cuts);
  std::filesystem::create_directories(out);
  io::write_file(out / "effectivity.csv", bench_effectivity_csv(rep));
  io::write_file(out / "samples.csv", bench_samples_csv(rep));
  io::write_file(out / "timing.csv", bench_timing_csv(rep));
  std::string cut_text;
  for (const auto& [nx, ny] : cuts) cut_text += (cut_text.empty() ? "" : " ") + std::to_string(nx) + ":" + std::to_string(ny);
  io::KeyValues kv{{"format", "rbstokes-bench"},
                   {"database_config_digest", man.at("config_digest")},
                   {"eps", io::fmt(db.eps)},
                   {"samples", std::to_string(samples)},
                   {"seed", std::to_string(seed)},
                   {"cuts", cut_text},
                   {"time_levels", "10 20 40 60 80 100"},
                   {"constants_mode", rep.constants_mode},
                   {"normalization", rep.normalization},
                   {"violations", std::to_string(rep.violations)},
                   {"checked", std::to_string(rep.checked)},
                   {"timing_method", "median_of_5_warm"}};
  io::write_file(out / "manifest.txt", io::format_key_values(kv));
  return rep;
}

}  // namespace rbstokes
