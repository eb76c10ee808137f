// SPDX-License-Identifier: Apache-2.0
// rbstokes: train, query and benchmark reduced-basis databases for the channel Stokes problem.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rbstokes/rbstokes.hpp"

namespace fs = std::filesystem;
using namespace rbstokes;

namespace {

enum Exit { kOk = 0, kUsage = 2, kNumerical = 3, kNotConverged = 4 };

struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;
  std::optional<double> eps, tol;
  std::optional<int> resolution, training_size;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override one config key (key=value), repeatable");
    app->add_option("--eps", eps, "penalty parameter (0 selects the standard formulation)");
    app->add_option("--tol", tol, "greedy tolerance on the max relative bound");
    app->add_option("--resolution", resolution, "reference mesh refinement");
    app->add_option("--training-size", training_size, "|Sigma|");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!file.empty())
      for (const auto& [k, v] : io::parse_key_values(io::read_file(file), file)) c.set(k, v);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      c.set(io::trim(s.substr(0, eq)), io::trim(s.substr(eq + 1)));
    }
    if (eps) c.eps = *eps;
    if (tol) c.tol = *tol;
    if (resolution) c.resolution = *resolution;
    if (training_size) c.training_size = *training_size;
    c.validate();
    return c;
  }
};

int cmd_mesh(int resolution, const std::string& out) {
  const auto mesh = generate_reference_mesh(resolution);
  const auto sp = build_truth_spaces(mesh);
  fs::create_directories(out);
  std::ofstream os(fs::path(out) / "mesh.txt");
  write_mesh(os, mesh);
  if (!os) throw ConfigError("cannot write " + out + "/mesh.txt");
  io::write_file(fs::path(out) / "manifest.txt",
                 io::format_key_values({{"format", "rbstokes-mesh"},
                                        {"resolution", std::to_string(resolution)},
                                        {"mesh_digest", io::hex64(mesh_digest(mesh))},
                                        {"vertices", std::to_string(mesh.vertices.size())},
                                        {"triangles", std::to_string(mesh.triangles.size())},
                                        {"velocity_dofs", std::to_string(sp.n_velocity)},
                                        {"pressure_dofs", std::to_string(sp.n_pressure)}}));
  std::printf("mesh r=%d: %zu vertices, %zu triangles, %d velocity + %d pressure dofs\n", resolution,
              mesh.vertices.size(), mesh.triangles.size(), sp.n_velocity, sp.n_pressure);
  return kOk;
}

int cmd_constants(const RunConfig& c, const std::string& out) {
  const auto model = make_model(c);
  const ConstantOracle oracle(model);
  const auto t0 = std::chrono::steady_clock::now();
  const auto [bounds, report] = train_constants(oracle, c);
  const double secs = seconds_since(t0);
  fs::create_directories(out);
  std::string s = "point,mu1,mu2,constant,exact\n";
  for (std::size_t i = 0; i < bounds.points().size(); ++i) {
    const auto& p = bounds.points()[i];
    for (auto k : kAllConstantKinds)
      s += std::to_string(i) + "," + mu_values(p.mu) + to_string(k) + "," + io::fmt(p.exact[static_cast<std::size_t>(k)]) +
           "\n";
  }
  io::write_file(fs::path(out) / "constants.csv", s);
  io::write_file(fs::path(out) / "constants_report.csv", constants_report_csv(report));
  auto kv = config_manifest_entries(c);
  kv.insert(kv.begin(), {"format", "rbstokes-constants"});
  kv.emplace_back("tolerance_met", report.tolerance_met ? "1" : "0");
  io::write_file(fs::path(out) / "manifest.txt", io::format_key_values(kv));
  io::write_file(fs::path(out) / "timing.csv", "stage,seconds\nconstants," + io::fmt(secs) + "\n");
  for (const auto& n : report.notes) std::printf("note: %s\n", n.c_str());
  std::printf("constants: %zu training points, %.2f s\n", bounds.points().size(), secs);
  return kOk;
}

int cmd_train(const RunConfig& c, const std::string& out, bool no_basis) {
  std::printf("train: eps=%g tol=%g |Sigma|=%d resolution=%d digest=%s\n", c.eps, c.tol, c.training_size,
              c.resolution, c.digest().c_str());
  const auto o = train_to_dir(c, out, !no_basis);
  const auto& tr = o.result.trace;
  for (const auto& it : tr.iterations)
    std::printf("  %3d  N_X=%3d N_Y=%3d  bound=%.3e  indicator=%.3e  events=%zu%s\n", it.N, it.NX, it.NY,
                it.max_relative_bound, it.max_indicator, it.events.size(),
                it.stabilized ? "" : ("  [" + it.note + "]").c_str());
  std::printf("%s: %s, %zu outer iterations, N_X=%d N_Y=%d, constants %.1f s, greedy %.1f s\n", tr.algorithm.c_str(),
              tr.converged ? "converged" : "not converged", tr.iterations.size(), o.result.database.NX,
              o.result.database.NY, o.constants_seconds, o.greedy_seconds);
  if (!tr.note.empty()) std::printf("note: %s\n", tr.note.c_str());
  if (!tr.converged) {
    std::fprintf(stderr, "train: tolerance not reached; partial database kept in %s (manifest converged = 0)\n",
                 out.c_str());
    return kNotConverged;
  }
  return kOk;
}

struct QueryFlags {
  std::string db, mu, bound = "sym";
  std::optional<double> eps_check;
  std::optional<int> k;
  bool with_truth = false;
};

int cmd_query(const QueryFlags& q) {
  const auto db = load_database(q.db);
  const Parameter mu = parse_parameter(q.mu);
  db.geometry->domain().require(mu);
  if (q.eps_check && *q.eps_check != db.eps)
    throw UsageError("database was trained with eps=" + io::fmt(db.eps) + ", not " + io::fmt(*q.eps_check));
  const BoundKind kind = parse_bound_kind(q.bound);
  if (kind == BoundKind::penalty && db.eps == 0.0)
    throw UsageError("penalty bound requested on an eps = 0 database");
  if (kind != BoundKind::penalty && db.eps > 0.0)
    throw UsageError(std::string(to_string(kind)) + " bound needs an eps = 0 database (this one has eps=" +
                     io::fmt(db.eps) + ")");
  const int K = db.grid.K;
  const int kmax = q.k ? *q.k : K;
  if (kmax < 1 || kmax > K) throw UsageError("--k must lie in [1, " + std::to_string(K) + "]");

  const auto ev = evaluate_online(db, mu, db.eps, kind, false);
  const double solve_ms = median_ms(5, [&] { (void)solve_rb_online(db, mu, db.eps); });
  const double bound_ms = median_ms(5, [&] {
    const auto n = residual_norms_online(db, ev.traj, mu, db.eps);
    (void)compute_bound(kind, n, db.constants.bound_constants_at(mu), db.grid.dt(), db.eps, K);
  });

  std::vector<double> err;
  if (q.with_truth) {
    if (db.velocity_basis.cols() != db.NX) throw UsageError("--with-truth needs a database saved with its bases");
    const auto model = model_for_database(q.db, db);
    const auto truth = TruthSolver(model).solve(mu, db.eps);
    const auto e = trajectory_error(truth, reconstruct(ev.traj, db.velocity_basis, db.pressure_basis));
    const auto en = energy_norms(e.velocity, e.pressure, db.eps, assemble_at(model->ops, mu), db.grid.dt(), K);
    err = db.eps > 0.0 ? en.l2_Z : en.l2_X;
  }
  const auto& rb = db.eps > 0.0 ? ev.rb_norms.l2_Z : ev.rb_norms.l2_X;
  std::printf("mu=(%s) eps=%g bound=%s constants=%s N_X=%d N_Y=%d\n", format_parameter(mu).c_str(), db.eps,
              to_string(kind), ev.bound.constants_mode().c_str(), db.NX, db.NY);
  std::printf("%5s %14s %14s%s\n", "k", "bound", "rel_bound", q.with_truth ? "          error    effectivity" : "");
  for (int k = 1; k <= kmax; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const double b = ev.bound.values[kk];
    std::printf("%5d %14.6e %14.6e", k, b, rb[kk] > 0.0 ? b / rb[kk] : std::numeric_limits<double>::infinity());
    if (q.with_truth) std::printf(" %14.6e %14.6e", err[kk], effectivity(b, err[kk]));
    std::printf("\n");
  }
  std::printf("online solve %.4f ms, bound %.4f ms (median of 5)\n", solve_ms, bound_ms);
  return kOk;
}

int cmd_bench(const std::string& db, int samples, std::uint64_t seed, const std::string& out, int cuts) {
  const auto rep = bench_to_dir(db, out, samples, seed, static_cast<std::size_t>(cuts));
  std::printf("bench: %d samples, %zu rows, %d/%d bound violations, constants=%s\n", samples, rep.rows.size(),
              rep.violations, rep.checked, rep.constants_mode.c_str());
  std::printf("timing at N_X=%d N_Y=%d: truth %.2f ms, online %.3f ms, speedup %.1fx\n", rep.timing.NX, rep.timing.NY,
              rep.timing.truth_ms,
              rep.timing.online_solve_ms + (rep.eps > 0.0 ? rep.timing.penalty_bound_ms : rep.timing.sym_bound_ms),
              rep.timing.speedup());
  return rep.violations == 0 ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reduced-basis workbench for the parametrized instationary Stokes channel"};
  app.require_subcommand(1);

  int mesh_res = 4;
  std::string mesh_out = "mesh";
  auto* mesh = app.add_subcommand("mesh", "generate the reference mesh and report dof counts");
  mesh->add_option("--resolution", mesh_res, "refinement level")->check(CLI::PositiveNumber);
  mesh->add_option("--out", mesh_out, "output directory");

  ConfigFlags cflags;
  std::string const_out = "constants";
  auto* constants = app.add_subcommand("constants", "train the stability-constant bounds");
  cflags.attach(constants);
  constants->add_option("--out", const_out, "output directory");

  ConfigFlags tflags;
  std::string train_out;
  bool no_basis = false;
  auto* train = app.add_subcommand("train", "run the POD-greedy and write a database");
  tflags.attach(train);
  train->add_option("--out", train_out, "database directory")->required();
  train->add_flag("--no-basis", no_basis, "omit the truth bases (query --with-truth and bench need them)");

  QueryFlags qf;
  auto* query = app.add_subcommand("query", "certified online evaluation at one parameter");
  query->add_option("--db", qf.db, "database directory")->required();
  query->add_option("--mu", qf.mu, "parameter, comma separated")->required();
  query->add_option("--bound", qf.bound, "sym, nonsym or penalty");
  query->add_option("--eps-check", qf.eps_check, "fail unless the database eps equals this value");
  query->add_option("--k", qf.k, "last time level to print");
  query->add_flag("--with-truth", qf.with_truth, "also solve the truth problem and print errors");

  std::string bench_db, bench_out = "bench";
  int bench_samples = 25, bench_cuts = 4;
  std::uint64_t bench_seed = 7;
  auto* bench = app.add_subcommand("bench", "truth vs reduced benchmark on random parameters");
  bench->add_option("--db", bench_db, "database directory")->required();
  bench->add_option("--samples", bench_samples, "number of random parameters");
  bench->add_option("--seed", bench_seed, "sample seed");
  bench->add_option("--out", bench_out, "output directory");
  bench->add_option("--cuts", bench_cuts, "number of basis-size cuts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*mesh) return cmd_mesh(mesh_res, mesh_out);
    if (*constants) return cmd_constants(cflags.resolve(), const_out);
    if (*train) return cmd_train(tflags.resolve(), train_out, no_basis);
    if (*query) return cmd_query(qf);
    if (*bench) return cmd_bench(bench_db, bench_samples, bench_seed, bench_out, bench_cuts);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsage;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "parameter error: %s\n", e.what());
    return kUsage;
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "database error: %s\n", e.what());
    return kUsage;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumerical;
  }
  return kUsage;
}
