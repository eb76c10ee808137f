// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbstokes/errors.hpp"
#include "rbstokes/geometry.hpp"
#include "rbstokes/io.hpp"
#include "rbstokes/rb_core.hpp"
#include "rbstokes/stability_constants.hpp"

// Database directory layout:
//   manifest.txt             key = value, schema_version first
//   thetas.txt               one line per coefficient term: form q weight subdomain kind r c
//   arrays/<name>.mtx        MatrixMarket arrays (reduced operators, residual coordinates)
//   constants.bin            little-endian training table for the stability constant bounds
//   basis/velocity.mtx, basis/pressure.mtx   only when saved with the bases
//
// constants.bin: "RBSCONST", u32 version, u32 points, u32 param dim, u32 subdomains, u32 Q_b;
// then per point: f64 mu[dim]; 7 x (u8 kind, f64 exact); f64 theta[subdomains][4]
// (|det|, G11, G22, G12); f64 beta_quadratic[Q_b][Q_b] row-major.

namespace rbstokes {

namespace detail {

inline std::vector<std::pair<std::string, const Eigen::MatrixXd*>> database_arrays(const RBDatabase& db) {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> out;
  auto forms = [&](const char* name, const ReducedForm& f) {
    for (std::size_t q = 0; q < f.q.size(); ++q) out.emplace_back(std::string(name) + "_" + std::to_string(q), &f.q[q]);
  };
  forms("m", db.op.m);
  forms("a", db.op.a);
  forms("b", db.op.b);
  forms("c", db.op.c);
  out.emplace_back("F1", &db.op.F1);
  out.emplace_back("F2", &db.op.F2);
  out.emplace_back("G", &db.op.G);
  out.emplace_back("r1_F", &db.res.r1_F);
  out.emplace_back("r2_G", &db.res.r2_G);
  auto blocks = [&](const char* name, const std::vector<Eigen::MatrixXd>& v) {
    for (std::size_t q = 0; q < v.size(); ++q) out.emplace_back(std::string(name) + "_" + std::to_string(q), &v[q]);
  };
  blocks("r1_m", db.res.r1_m);
  blocks("r1_a", db.res.r1_a);
  blocks("r1_bt", db.res.r1_bt);
  blocks("r2_b", db.res.r2_b);
  blocks("r2_c", db.res.r2_c);
  return out;
}

inline std::string format_thetas(const RBDatabase& db) {
  std::string s = "# form q weight subdomain kind r c\n";
  const std::pair<char, const ReducedForm*> forms[] = {{'m', &db.op.m}, {'a', &db.op.a}, {'b', &db.op.b}, {'c', &db.op.c}};
  for (const auto& [name, f] : forms)
    for (std::size_t q = 0; q < f->thetas.size(); ++q)
      for (const auto& [w, ref] : f->thetas[q].terms)
        s += std::string(1, name) + " " + std::to_string(q) + " " + io::fmt(w) + " " + std::to_string(ref.subdomain) +
             " " + std::to_string(static_cast<int>(ref.kind)) + " " + std::to_string(ref.r) + " " +
             std::to_string(ref.c) + "\n";
  return s;
}

inline std::string constants_table(const ConstantBounds& cb) {
  io::ByteWriter w;
  w.bytes("RBSCONST");
  w.u32(1);
  const auto& pts = cb.points();
  w.u32(static_cast<std::uint32_t>(pts.size()));
  const std::uint32_t dim = pts.empty() ? 0 : static_cast<std::uint32_t>(pts.front().mu.size());
  const std::uint32_t ns = pts.empty() ? 0 : static_cast<std::uint32_t>(pts.front().theta.size());
  const std::uint32_t qb = pts.empty() ? 0 : static_cast<std::uint32_t>(pts.front().beta_quadratic.rows());
  w.u32(dim);
  w.u32(ns);
  w.u32(qb);
  for (const auto& p : pts) {
    for (Eigen::Index i = 0; i < p.mu.size(); ++i) w.f64(p.mu[i]);
    for (auto k : kAllConstantKinds) {
      w.u8(static_cast<std::uint8_t>(k));
      w.f64(p.exact[static_cast<std::size_t>(k)]);
    }
    for (const auto& t : p.theta)
      for (double x : t) w.f64(x);
    for (Eigen::Index i = 0; i < p.beta_quadratic.rows(); ++i)
      for (Eigen::Index j = 0; j < p.beta_quadratic.cols(); ++j) w.f64(p.beta_quadratic(i, j));
  }
  return w.str();
}

inline std::vector<ConstantTrainingPoint> parse_constants_table(const std::string& data) {
  io::ByteReader r(data, "constants.bin");
  if (r.bytes(8, "magic") != "RBSCONST") throw SchemaError("constants.bin: bad magic");
  const auto ver = r.u32("version");
  if (ver != 1) throw SchemaError("constants.bin: version " + std::to_string(ver) + " is not supported (expected 1)");
  const auto n = r.u32("points"), dim = r.u32("param dim"), ns = r.u32("subdomains"), qb = r.u32("Q_b");
  std::vector<ConstantTrainingPoint> pts(n);
  for (auto& p : pts) {
    p.mu.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i) p.mu[i] = r.f64("mu");
    for (auto k : kAllConstantKinds) {
      if (r.u8("kind") != static_cast<std::uint8_t>(k)) throw SchemaError("constants.bin: kind order mismatch");
      p.exact[static_cast<std::size_t>(k)] = r.f64("exact");
    }
    p.theta.resize(ns);
    for (auto& t : p.theta)
      for (double& x : t) x = r.f64("theta");
    p.beta_quadratic.resize(qb, qb);
    for (std::uint32_t i = 0; i < qb; ++i)
      for (std::uint32_t j = 0; j < qb; ++j) p.beta_quadratic(i, j) = r.f64("beta_quadratic");
  }
  if (!r.done()) throw SchemaError("constants.bin: trailing bytes");
  return pts;
}

class ManifestReader {
 public:
  explicit ManifestReader(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}
  const std::string& str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw SchemaError("manifest: missing field '" + key + "'");
    return it->second;
  }
  long integer(const std::string& key) const {
    const auto& s = str(key);
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0') throw SchemaError("manifest: field '" + key + "' is not an integer: '" + s + "'");
    return v;
  }
  double real(const std::string& key) const {
    const auto& s = str(key);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') throw SchemaError("manifest: field '" + key + "' is not a number: '" + s + "'");
    return v;
  }
  std::uint64_t hex(const std::string& key) const {
    const auto& s = str(key);
    char* end = nullptr;
    const auto v = std::strtoull(s.c_str(), &end, 16);
    if (s.empty() || *end != '\0') throw SchemaError("manifest: field '" + key + "' is not hexadecimal: '" + s + "'");
    return v;
  }
  Parameter param(const std::string& key) const {
    try {
      return parse_parameter(str(key));
    } catch (const SchemaError&) {
      throw;
    } catch (const std::exception&) {
      throw SchemaError("manifest: field '" + key + "' is not a parameter list");
    }
  }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace detail

inline io::KeyValues database_manifest(const RBDatabase& db, bool with_basis) {
  const auto q = db.q_counts();
  return {{"schema_version", std::to_string(RBDatabase::kSchemaVersion)},
          {"format", "rbstokes-database"},
          {"N_X", std::to_string(db.NX)},
          {"N_Y", std::to_string(db.NY)},
          {"Q_m", std::to_string(q[0])},
          {"Q_a", std::to_string(q[1])},
          {"Q_b", std::to_string(q[2])},
          {"Q_c", std::to_string(q[3])},
          {"r1_rank", std::to_string(db.res.r1_F.rows())},
          {"r2_rank", std::to_string(db.res.r2_G.rows())},
          {"T", io::fmt(db.grid.T)},
          {"K", std::to_string(db.grid.K)},
          {"eps", io::fmt(db.eps)},
          {"geometry", db.geometry_name},
          {"domain_lower", format_parameter(db.domain_lower)},
          {"domain_upper", format_parameter(db.domain_upper)},
          {"mesh_digest", io::hex64(db.mesh_digest)},
          {"truth_velocity_dofs", std::to_string(db.truth_velocity_dofs)},
          {"truth_pressure_dofs", std::to_string(db.truth_pressure_dofs)},
          {"basis_version", std::to_string(db.basis_version)},
          {"constants_points", std::to_string(db.constants.points().size())},
          {"with_basis", with_basis ? "1" : "0"}};
}

// Writes the database; `extra` entries (config digest, run labels) are appended to the manifest.
inline void save_database(const RBDatabase& db, const std::filesystem::path& dir, bool with_basis = false,
                          const io::KeyValues& extra = {}) {
  namespace fs = std::filesystem;
  if (with_basis && (db.velocity_basis.cols() != db.NX || db.pressure_basis.cols() != db.NY))
    throw UsageError("save_database: bases requested but not held by the database");
  fs::create_directories(dir / "arrays");
  auto kv = database_manifest(db, with_basis);
  kv.insert(kv.end(), extra.begin(), extra.end());
  io::write_file(dir / "manifest.txt", io::format_key_values(kv));
  io::write_file(dir / "thetas.txt", detail::format_thetas(db));
  for (const auto& [name, A] : detail::database_arrays(db))
    io::write_file(dir / "arrays" / (name + ".mtx"), io::matrix_market_array(*A));
  io::write_file(dir / "constants.bin", detail::constants_table(db.constants));
  if (with_basis) {
    fs::create_directories(dir / "basis");
    io::write_file(dir / "basis" / "velocity.mtx", io::matrix_market_array(db.velocity_basis));
    io::write_file(dir / "basis" / "pressure.mtx", io::matrix_market_array(db.pressure_basis));
  }
}

inline std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir) {
  try {
    return io::parse_key_values(io::read_file(dir / "manifest.txt"), "manifest.txt");
  } catch (const ConfigError& e) {
    throw SchemaError(e.what());
  }
}

inline RBDatabase load_database(const std::filesystem::path& dir) {
  const detail::ManifestReader m(read_manifest(dir));
  const long ver = m.integer("schema_version");
  if (ver != RBDatabase::kSchemaVersion)
    throw SchemaError("manifest: field 'schema_version' is " + std::to_string(ver) + ", this build reads " +
                      std::to_string(RBDatabase::kSchemaVersion) + " and has no migration from it");
  if (m.str("format") != "rbstokes-database") throw SchemaError("manifest: field 'format' is not rbstokes-database");
  RBDatabase db;
  db.NX = static_cast<int>(m.integer("N_X"));
  db.NY = static_cast<int>(m.integer("N_Y"));
  if (db.NX < 0 || db.NY < 0) throw SchemaError("manifest: field 'N_X'/'N_Y' is negative");
  const long K = m.integer("K");
  const double T = m.real("T");
  if (K < 1 || !(T > 0.0)) throw SchemaError("manifest: field 'K' or 'T' is out of range");
  db.grid = TimeGrid(T, static_cast<int>(K));
  db.eps = m.real("eps");
  db.geometry_name = m.str("geometry");
  if (db.geometry_name != "channel") throw SchemaError("manifest: field 'geometry' names an unknown geometry");
  db.domain_lower = m.param("domain_lower");
  db.domain_upper = m.param("domain_upper");
  try {
    db.geometry = std::make_shared<const AffineGeometry>(make_channel_geometry(ParameterDomain(db.domain_lower, db.domain_upper)));
  } catch (const ConfigError& e) {
    throw SchemaError(std::string("manifest: field 'domain_lower'/'domain_upper': ") + e.what());
  }
  db.mesh_digest = m.hex("mesh_digest");
  db.truth_velocity_dofs = static_cast<int>(m.integer("truth_velocity_dofs"));
  db.truth_pressure_dofs = static_cast<int>(m.integer("truth_pressure_dofs"));
  db.basis_version = static_cast<std::uint64_t>(m.integer("basis_version"));
  const long qm = m.integer("Q_m"), qa = m.integer("Q_a"), qb = m.integer("Q_b"), qc = m.integer("Q_c");
  const long r1 = m.integer("r1_rank"), r2 = m.integer("r2_rank");

  // coefficient functions
  std::map<char, std::vector<Theta>> th{{'m', std::vector<Theta>(qm)}, {'a', std::vector<Theta>(qa)},
                                        {'b', std::vector<Theta>(qb)}, {'c', std::vector<Theta>(qc)}};
  {
    std::istringstream in(io::read_file(dir / "thetas.txt"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      char form = 0;
      long q = -1;
      std::string w;
      int sub = -1, kind = -1, r = -1, c = -1;
      if (!(ls >> form >> q >> w >> sub >> kind >> r >> c) || !th.count(form) || q < 0 ||
          q >= static_cast<long>(th[form].size()) || kind < 0 || kind > 2 || r < 0 || r > 1 || c < 0 || c > 1 ||
          sub < 0 || sub >= db.geometry->num_subdomains())
        throw SchemaError("thetas.txt: bad line '" + line + "'");
      th[form][static_cast<std::size_t>(q)].terms.push_back(
          {std::strtod(w.c_str(), nullptr), ThetaRef{sub, static_cast<ThetaKind>(kind), r, c}});
    }
    for (const auto& [f, v] : th)
      for (const auto& t : v)
        if (t.terms.empty()) throw SchemaError(std::string("thetas.txt: form '") + f + "' has an empty coefficient");
  }
  db.op.m.thetas = th['m'];
  db.op.a.thetas = th['a'];
  db.op.b.thetas = th['b'];
  db.op.c.thetas = th['c'];
  db.op.m.q.resize(qm);
  db.op.a.q.resize(qa);
  db.op.b.q.resize(qb);
  db.op.c.q.resize(qc);
  db.res.r1_m.resize(qm);
  db.res.r1_a.resize(qa);
  db.res.r1_bt.resize(qb);
  db.res.r2_b.resize(qb);
  db.res.r2_c.resize(qc);

  const long nx = db.NX, ny = db.NY;
  auto expect = [&](const std::string& name, long rows, long cols) {
    const auto path = dir / "arrays" / (name + ".mtx");
    Eigen::MatrixXd A = io::read_matrix_market(path);
    if (A.rows() != rows || A.cols() != cols)
      throw SchemaError("arrays/" + name + ".mtx: size " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) +
                        " does not match the manifest (" + std::to_string(rows) + "x" + std::to_string(cols) + ")");
    return A;
  };
  for (long q = 0; q < qm; ++q) db.op.m.q[q] = expect("m_" + std::to_string(q), nx, nx);
  for (long q = 0; q < qa; ++q) db.op.a.q[q] = expect("a_" + std::to_string(q), nx, nx);
  for (long q = 0; q < qb; ++q) db.op.b.q[q] = expect("b_" + std::to_string(q), ny, nx);
  for (long q = 0; q < qc; ++q) db.op.c.q[q] = expect("c_" + std::to_string(q), ny, ny);
  db.op.F1 = expect("F1", nx, 1);
  db.op.F2 = expect("F2", nx, 1);
  db.op.G = expect("G", ny, 1);
  db.res.r1_F = expect("r1_F", r1, 2);
  db.res.r2_G = expect("r2_G", r2, 1);
  for (long q = 0; q < qm; ++q) db.res.r1_m[q] = expect("r1_m_" + std::to_string(q), r1, nx);
  for (long q = 0; q < qa; ++q) db.res.r1_a[q] = expect("r1_a_" + std::to_string(q), r1, nx);
  for (long q = 0; q < qb; ++q) db.res.r1_bt[q] = expect("r1_bt_" + std::to_string(q), r1, ny);
  for (long q = 0; q < qb; ++q) db.res.r2_b[q] = expect("r2_b_" + std::to_string(q), r2, nx);
  for (long q = 0; q < qc; ++q) db.res.r2_c[q] = expect("r2_c_" + std::to_string(q), r2, ny);

  auto pts = detail::parse_constants_table(io::read_file(dir / "constants.bin"));
  if (static_cast<long>(pts.size()) != m.integer("constants_points"))
    throw SchemaError("manifest: field 'constants_points' does not match constants.bin");
  if (!pts.empty()) {
    for (const auto& p : pts)
      if (p.mu.size() != db.domain_lower.size() || static_cast<int>(p.theta.size()) != db.geometry->num_subdomains() ||
          p.beta_quadratic.rows() != qb)
        throw SchemaError("constants.bin: table shape does not match the manifest");
    db.constants = ConstantBounds(db.geometry, db.op.b.thetas, std::move(pts));
  }

  if (m.str("with_basis") == "1") {
    db.velocity_basis = io::read_matrix_market(dir / "basis" / "velocity.mtx");
    db.pressure_basis = io::read_matrix_market(dir / "basis" / "pressure.mtx");
    if (db.velocity_basis.rows() != db.truth_velocity_dofs || db.velocity_basis.cols() != nx ||
        db.pressure_basis.rows() != db.truth_pressure_dofs || db.pressure_basis.cols() != ny)
      throw SchemaError("basis/: basis sizes do not match the manifest");
  } else if (m.str("with_basis") != "0") {
    throw SchemaError("manifest: field 'with_basis' must be 0 or 1");
  }
  return db;
}

}  // namespace rbstokes
