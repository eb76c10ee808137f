// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rbstokes/errors.hpp"
#include "rbstokes/parameter.hpp"

namespace rbstokes {

// Affine map x -> matrix * x + offset from the reference subdomain onto its physical image.
struct SubdomainMap {
  int subdomain_id = 0;
  Eigen::Matrix2d matrix = Eigen::Matrix2d::Identity();
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();

  double det() const { return matrix.determinant(); }
  double abs_det() const { return std::abs(det()); }
  Eigen::Vector2d apply(const Eigen::Vector2d& x) const { return matrix * x + offset; }
};

// Affine map sending reference triangle (p0, p1, p2) onto (q0, q1, q2).
inline SubdomainMap map_from_triangles(int id, const std::array<Eigen::Vector2d, 3>& p,
                                       const std::array<Eigen::Vector2d, 3>& q) {
  Eigen::Matrix2d P, Q;
  P << p[1] - p[0], p[2] - p[0];
  Q << q[1] - q[0], q[2] - q[0];
  SubdomainMap m;
  m.subdomain_id = id;
  m.matrix = Q * P.inverse();
  m.offset = q[0] - m.matrix * p[0];
  return m;
}

enum class BoundaryTag : std::uint8_t { inflow = 0, outflow = 1, wall = 2 };

inline const char* to_string(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::inflow: return "inflow";
    case BoundaryTag::outflow: return "outflow";
    case BoundaryTag::wall: return "wall";
  }
  return "?";
}

struct BoundaryEdge {
  int a = 0;
  int b = 0;
  BoundaryTag tag = BoundaryTag::wall;
};

struct ReferenceMesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<int> subdomain_of;              // per triangle
  std::vector<BoundaryEdge> boundary;
  int num_subdomains = 1;
  double length = 5.0;  // x1 coordinate of the outflow boundary

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }

  double triangle_area(std::size_t t) const {
    const auto& tri = triangles[t];
    const Eigen::Vector2d e1 = vertices[tri[1]] - vertices[tri[0]];
    const Eigen::Vector2d e2 = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  }

  double area() const {
    double s = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t) s += triangle_area(t);
    return s;
  }

  // Unique undirected edges (sorted vertex pairs), in order of first appearance.
  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    std::map<std::pair<int, int>, int> seen;
    for (const auto& tri : triangles) {
      for (int e = 0; e < 3; ++e) {
        int a = tri[e], b = tri[(e + 1) % 3];
        if (a > b) std::swap(a, b);
        if (seen.emplace(std::make_pair(a, b), 0).second) out.emplace_back(a, b);
      }
    }
    return out;
  }
};

// Classifies the unshared edges of a triangulation: x1 = 0 -> inflow, x1 = length -> outflow, else wall.
inline std::vector<BoundaryEdge> tag_boundary(const std::vector<Eigen::Vector2d>& vertices,
                                              const std::vector<std::array<int, 3>>& triangles, double length) {
  std::map<std::pair<int, int>, int> count;
  std::vector<std::pair<int, int>> order;
  for (const auto& tri : triangles) {
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e], b = tri[(e + 1) % 3];
      auto key = std::minmax(a, b);
      if (count[key]++ == 0) order.emplace_back(a, b);
    }
  }
  const double tol = 1e-12 * std::max(1.0, length);
  std::vector<BoundaryEdge> out;
  for (const auto& [a, b] : order) {
    if (count[std::minmax(a, b)] != 1) continue;
    BoundaryEdge be{a, b, BoundaryTag::wall};
    const auto& pa = vertices[static_cast<std::size_t>(a)];
    const auto& pb = vertices[static_cast<std::size_t>(b)];
    if (std::abs(pa.x()) < tol && std::abs(pb.x()) < tol) be.tag = BoundaryTag::inflow;
    else if (std::abs(pa.x() - length) < tol && std::abs(pb.x() - length) < tol) be.tag = BoundaryTag::outflow;
    out.push_back(be);
  }
  return out;
}

// Piecewise-affine parametrized geometry. `maps(mu)` returns one map per subdomain;
// `diagonal[s]` marks subdomains whose matrix is diagonal for every mu (off-diagonal affine
// terms are then structurally absent).
class AffineGeometry {
 public:
  using MapFunction = std::function<std::vector<SubdomainMap>(const Parameter&)>;

  AffineGeometry(ParameterDomain domain, Parameter mu_ref, int num_subdomains, std::vector<bool> diagonal,
                 MapFunction fn)
      : domain_(std::move(domain)),
        mu_ref_(std::move(mu_ref)),
        num_subdomains_(num_subdomains),
        diagonal_(std::move(diagonal)),
        fn_(std::move(fn)) {
    if (static_cast<int>(diagonal_.size()) != num_subdomains_) throw ConfigError("diagonal flags must match S");
  }

  const ParameterDomain& domain() const { return domain_; }
  const Parameter& reference_parameter() const { return mu_ref_; }
  int num_subdomains() const { return num_subdomains_; }
  bool is_diagonal(int s) const { return diagonal_[static_cast<std::size_t>(s)]; }

  std::vector<SubdomainMap> evaluate_affine_maps(const Parameter& mu) const {
    domain_.require(mu);
    auto maps = fn_(mu);
    for (const auto& m : maps) {
      if (!(m.abs_det() > 0.0) || !std::isfinite(m.det()))
        throw DomainError("singular affine map on subdomain " + std::to_string(m.subdomain_id) + " at mu=(" +
                          format_parameter(mu) + ")");
    }
    return maps;
  }

 private:
  ParameterDomain domain_;
  Parameter mu_ref_;
  int num_subdomains_;
  std::vector<bool> diagonal_;
  MapFunction fn_;
};

// Channel [0,5]x[0,1] with the obstacle [2,2.5]x[0,0.5] on the bottom wall.
// mu1 scales the obstacle width, mu2 its height; mu = (1,1) is the reference configuration.
//
// Subdomains (reference):
//   0: [0,1.5]x[0,0.5]     1: [0,1.5]x[0.5,1]          (lifting support, identity)
//   2: tri (1.5,0),(2,0),(2,0.5)                       3: tri (1.5,0),(2,0.5),(1.5,0.5)
//   4: tri (1.5,0.5),(2,0.5),(2,1)                     5: tri (1.5,0.5),(2,1),(1.5,1)
//   6: [2,2.5]x[0.5,1]     7: [2.5,5]x[0,0.5]          8: [2.5,5]x[0.5,1]
namespace channel {

constexpr double kLength = 5.0;
constexpr double kLiftEnd = 1.5;
constexpr double kObstacleLeft = 2.0;
constexpr double kObstacleRight = 2.5;
constexpr double kObstacleTop = 0.5;
constexpr int kNumSubdomains = 9;

// Global piecewise-affine map evaluated at a vertex of the subdomain layout.
inline Eigen::Vector2d map_layout_vertex(const Eigen::Vector2d& x, const Parameter& mu) {
  const double m1 = mu[0], m2 = mu[1];
  const double s = (kLength - kObstacleLeft - (kObstacleRight - kObstacleLeft) * m1) / (kLength - kObstacleRight);
  double X;
  if (x.x() <= kObstacleLeft) X = x.x();
  else if (x.x() <= kObstacleRight) X = kObstacleLeft + m1 * (x.x() - kObstacleLeft);
  else X = kObstacleLeft + (kObstacleRight - kObstacleLeft) * m1 + s * (x.x() - kObstacleRight);
  double Y = x.y();
  if (x.x() >= kObstacleLeft) {
    if (x.y() <= kObstacleTop) Y = m2 * x.y();
    else Y = kObstacleTop * m2 + (x.y() - kObstacleTop) * (1.0 - kObstacleTop * m2) / (1.0 - kObstacleTop);
  }
  return {X, Y};
}

// Three layout vertices spanning each subdomain.
inline std::array<Eigen::Vector2d, 3> anchors(int s) {
  using V = Eigen::Vector2d;
  switch (s) {
    case 0: return {V(0, 0), V(1.5, 0), V(0, 0.5)};
    case 1: return {V(0, 0.5), V(1.5, 0.5), V(0, 1)};
    case 2: return {V(1.5, 0), V(2, 0), V(2, 0.5)};
    case 3: return {V(1.5, 0), V(2, 0.5), V(1.5, 0.5)};
    case 4: return {V(1.5, 0.5), V(2, 0.5), V(2, 1)};
    case 5: return {V(1.5, 0.5), V(2, 1), V(1.5, 1)};
    case 6: return {V(2, 0.5), V(2.5, 0.5), V(2, 1)};
    case 7: return {V(2.5, 0), V(5, 0), V(2.5, 0.5)};
    default: return {V(2.5, 0.5), V(5, 0.5), V(2.5, 1)};
  }
}

inline std::vector<SubdomainMap> maps(const Parameter& mu) {
  std::vector<SubdomainMap> out;
  out.reserve(kNumSubdomains);
  for (int s = 0; s < kNumSubdomains; ++s) {
    auto p = anchors(s);
    std::array<Eigen::Vector2d, 3> q{map_layout_vertex(p[0], mu), map_layout_vertex(p[1], mu),
                                     map_layout_vertex(p[2], mu)};
    out.push_back(map_from_triangles(s, p, q));
  }
  return out;
}

// Subdomain containing a reference point strictly inside one subdomain (e.g. a triangle centroid).
inline int classify(const Eigen::Vector2d& c) {
  const bool lower = c.y() < kObstacleTop;
  if (c.x() < kLiftEnd) return lower ? 0 : 1;
  if (c.x() < kObstacleLeft) {
    const double u = c.x() - kLiftEnd;
    if (lower) return (c.y() < u) ? 2 : 3;
    return (c.y() - kObstacleTop < u) ? 4 : 5;
  }
  if (c.x() < kObstacleRight) return 6;
  return lower ? 7 : 8;
}

inline ParameterDomain default_domain() {
  return ParameterDomain(make_parameter({0.5, 0.5}), make_parameter({1.5, 1.5}));
}

}  // namespace channel

inline AffineGeometry make_channel_geometry(ParameterDomain domain = channel::default_domain()) {
  if (domain.dim() != 2) throw ConfigError("the channel geometry has two parameters");
  return AffineGeometry(std::move(domain), make_parameter({1.0, 1.0}), channel::kNumSubdomains,
                        {true, true, true, false, false, true, true, true, true}, &channel::maps);
}

// Structured crossed-triangle mesh of the reference channel: square cells of side 0.5/resolution,
// obstacle cells removed, each cell split into four triangles through its centre.
inline ReferenceMesh generate_reference_mesh(int resolution) {
  if (resolution < 1) throw ConfigError("mesh resolution must be >= 1");
  const int r = resolution;
  const int nx = 10 * r, ny = 2 * r;
  const double h = 0.5 / r;
  auto in_obstacle = [&](int i, int j) { return i >= 4 * r && i < 5 * r && j < r; };

  ReferenceMesh mesh;
  mesh.num_subdomains = channel::kNumSubdomains;
  mesh.length = channel::kLength;

  std::vector<int> corner((nx + 1) * (ny + 1), -1);
  auto corner_id = [&](int i, int j) -> int {
    int& id = corner[static_cast<std::size_t>(j * (nx + 1) + i)];
    if (id < 0) {
      id = static_cast<int>(mesh.vertices.size());
      mesh.vertices.emplace_back(i * h, j * h);
    }
    return id;
  };

  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (in_obstacle(i, j)) continue;
      const int v00 = corner_id(i, j), v10 = corner_id(i + 1, j);
      const int v11 = corner_id(i + 1, j + 1), v01 = corner_id(i, j + 1);
      const int c = static_cast<int>(mesh.vertices.size());
      mesh.vertices.emplace_back((i + 0.5) * h, (j + 0.5) * h);
      const std::array<std::array<int, 3>, 4> tris{{{v00, v10, c}, {v10, v11, c}, {v11, v01, c}, {v01, v00, c}}};
      for (const auto& t : tris) {
        const Eigen::Vector2d centroid = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
        mesh.triangles.push_back(t);
        mesh.subdomain_of.push_back(channel::classify(centroid));
      }
    }
  }
  mesh.boundary = tag_boundary(mesh.vertices, mesh.triangles, mesh.length);
  return mesh;
}

// Text export: header line with counts, then one section each for vertices, triangles,
// subdomain ids and boundary tags.
inline void write_mesh(std::ostream& os, const ReferenceMesh& mesh) {
  os << "rbstokes_mesh 1 vertices " << mesh.vertices.size() << " triangles " << mesh.triangles.size()
     << " boundary_edges " << mesh.boundary.size() << " subdomains " << mesh.num_subdomains << '\n';
  os.precision(17);
  os << "vertices\n";
  for (const auto& v : mesh.vertices) os << v.x() << ' ' << v.y() << '\n';
  os << "triangles\n";
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "subdomains\n";
  for (int s : mesh.subdomain_of) os << s << '\n';
  os << "boundary\n";
  for (const auto& e : mesh.boundary) os << e.a << ' ' << e.b << ' ' << to_string(e.tag) << '\n';
}

// FNV-1a over the mesh arrays; recorded in database manifests.
inline std::uint64_t mesh_digest(const ReferenceMesh& mesh) {
  std::uint64_t hsh = 1469598103934665603ULL;
  auto feed = [&](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hsh ^= p[i];
      hsh *= 1099511628211ULL;
    }
  };
  for (const auto& v : mesh.vertices) {
    const double xy[2] = {v.x(), v.y()};
    std::uint64_t bits[2];
    std::memcpy(bits, xy, sizeof bits);
    for (auto b : bits)
      for (int k = 0; k < 8; ++k) {
        const unsigned char c = static_cast<unsigned char>(b >> (8 * k));
        feed(&c, 1);
      }
  }
  auto feed_int = [&](std::int64_t x) {
    for (int k = 0; k < 8; ++k) {
      const unsigned char c = static_cast<unsigned char>(static_cast<std::uint64_t>(x) >> (8 * k));
      feed(&c, 1);
    }
  };
  for (const auto& t : mesh.triangles)
    for (int v : t) feed_int(v);
  for (int s : mesh.subdomain_of) feed_int(s);
  return hsh;
}

}  // namespace rbstokes
