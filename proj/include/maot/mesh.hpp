#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/LU>

#include "maot/types.hpp"

namespace maot {

struct DiskDomain {
  Point center{0.0, 0.0};
  double radius = 1.0;
};

/// Axis-aligned square of the given side length centred at the origin.
struct SquareDomain {
  double side = 1.0;
};

struct GenericDomain {};

using DomainTag = std::variant<GenericDomain, DiskDomain, SquareDomain>;

using Cell = std::array<std::size_t, 3>;
using Edge = std::array<std::size_t, 2>;

/// A boundary edge, stored in the counterclockwise order of its owning cell.
struct BoundaryFacet {
  Edge vertices;
  std::size_t cell;
  Vec2 normal;
};

/// Conforming triangulation of a planar domain.
///
/// Cells are stored counterclockwise; the constructor reorients clockwise
/// input and rejects degenerate or non-conforming cell lists. Edges are
/// enumerated once, with local edge l of a cell joining local vertices l and
/// (l+1) mod 3.
class Mesh {
public:
  Mesh() = default;

  Mesh(std::vector<Point> vertices, std::vector<Cell> cells, DomainTag tag = GenericDomain{})
      : vertices_(std::move(vertices)), cells_(std::move(cells)), tag_(tag) {
    if (cells_.empty())
      throw std::invalid_argument("mesh: no cells");
    for (auto& c : cells_) {
      for (auto v : c)
        if (v >= vertices_.size())
          throw std::invalid_argument("mesh: cell references vertex " + std::to_string(v) +
                                      " out of range");
      double a = signed_area(c);
      if (std::abs(a) <= 1e-300)
        throw std::invalid_argument("mesh: degenerate cell");
      if (a < 0.0)
        std::swap(c[1], c[2]);
    }
    build_topology();
  }

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<BoundaryFacet>& boundary_facets() const { return facets_; }
  const DomainTag& domain() const { return tag_; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return cells_.size(); }

  /// Global edge index of local edge l of cell c.
  std::size_t cell_edge(std::size_t c, int l) const { return cell_edges_[c][static_cast<std::size_t>(l)]; }

  /// Number of cells sharing each edge (1 on the boundary, 2 inside).
  const std::vector<int>& edge_valence() const { return edge_valence_; }

  bool is_boundary_vertex(std::size_t v) const { return boundary_vertex_[v]; }
  bool is_boundary_edge(std::size_t e) const { return edge_valence_[e] == 1; }

  double signed_area(const Cell& c) const {
    const Point& a = vertices_[c[0]];
    const Point& b = vertices_[c[1]];
    const Point& d = vertices_[c[2]];
    return 0.5 * ((b.x() - a.x()) * (d.y() - a.y()) - (d.x() - a.x()) * (b.y() - a.y()));
  }

  double cell_area(std::size_t c) const { return signed_area(cells_[c]); }

  double area() const {
    double s = 0.0;
    for (const auto& c : cells_)
      s += signed_area(c);
    return s;
  }

  double cell_diameter(std::size_t c) const {
    const auto& t = cells_[c];
    double d = 0.0;
    for (int i = 0; i < 3; ++i)
      d = std::max(d, (vertices_[t[static_cast<std::size_t>(i)]] - vertices_[t[static_cast<std::size_t>((i + 1) % 3)]]).norm());
    return d;
  }

private:
  void build_topology() {
    std::map<Edge, std::size_t> index;
    cell_edges_.assign(cells_.size(), {});
    edges_.clear();
    edge_valence_.clear();
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      for (std::size_t l = 0; l < 3; ++l) {
        std::size_t a = cells_[c][l], b = cells_[c][(l + 1) % 3];
        Edge key{std::min(a, b), std::max(a, b)};
        auto [it, inserted] = index.try_emplace(key, edges_.size());
        if (inserted) {
          edges_.push_back(key);
          edge_valence_.push_back(0);
        }
        cell_edges_[c][l] = it->second;
        if (++edge_valence_[it->second] > 2)
          throw std::invalid_argument("mesh: edge shared by more than two cells");
      }
    }
    facets_.clear();
    boundary_vertex_.assign(vertices_.size(), false);
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      for (std::size_t l = 0; l < 3; ++l) {
        if (edge_valence_[cell_edges_[c][l]] != 1)
          continue;
        std::size_t a = cells_[c][l], b = cells_[c][(l + 1) % 3];
        Vec2 t = vertices_[b] - vertices_[a];
        Vec2 n(t.y(), -t.x());
        facets_.push_back({{a, b}, c, n / n.norm()});
        boundary_vertex_[a] = boundary_vertex_[b] = true;
      }
    }
  }

  std::vector<Point> vertices_;
  std::vector<Cell> cells_;
  DomainTag tag_;
  std::vector<Edge> edges_;
  std::vector<std::array<std::size_t, 3>> cell_edges_;
  std::vector<int> edge_valence_;
  std::vector<BoundaryFacet> facets_;
  std::vector<bool> boundary_vertex_;
};

/// Uniform red refinement. Each cell splits into four through its edge
/// midpoints; on disk domains the midpoints of boundary edges are projected
/// radially onto the circle.
inline Mesh refine(const Mesh& mesh) {
  std::vector<Point> verts = mesh.vertices();
  const auto& edges = mesh.edges();
  std::vector<std::size_t> midpoint(edges.size());
  const auto* disk = std::get_if<DiskDomain>(&mesh.domain());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    Point m = 0.5 * (verts[edges[e][0]] + verts[edges[e][1]]);
    if (disk && mesh.is_boundary_edge(e)) {
      Vec2 r = m - disk->center;
      m = disk->center + disk->radius * r / r.norm();
    }
    midpoint[e] = verts.size();
    verts.push_back(m);
  }
  std::vector<Cell> cells;
  cells.reserve(4 * mesh.num_cells());
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto& t = mesh.cells()[c];
    std::size_t m01 = midpoint[mesh.cell_edge(c, 0)];
    std::size_t m12 = midpoint[mesh.cell_edge(c, 1)];
    std::size_t m20 = midpoint[mesh.cell_edge(c, 2)];
    cells.push_back({t[0], m01, m20});
    cells.push_back({m01, t[1], m12});
    cells.push_back({m20, m12, t[2]});
    cells.push_back({m01, m12, m20});
  }
  return Mesh(std::move(verts), std::move(cells), mesh.domain());
}

/// Mesh of (-1/2,1/2)^2 with n x n squares, each split along the diagonal
/// that avoids its corner nearest the centre. The mesh has the symmetries of
/// the square; the domain corners each lie in a single cell.
inline Mesh triangulate_square(std::size_t n) {
  if (n == 0)
    throw std::invalid_argument("triangulate_square: n must be positive");
  std::vector<Point> verts;
  verts.reserve((n + 1) * (n + 1));
  const double h = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j <= n; ++j)
    for (std::size_t i = 0; i <= n; ++i)
      verts.emplace_back(-0.5 + h * static_cast<double>(i), -0.5 + h * static_cast<double>(j));
  std::vector<Cell> cells;
  cells.reserve(2 * n * n);
  auto id = [n](std::size_t i, std::size_t j) { return j * (n + 1) + i; };
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const double cx = static_cast<double>(2 * i + 1) - static_cast<double>(n);
      const double cy = static_cast<double>(2 * j + 1) - static_cast<double>(n);
      if (cx * cy < 0.0) {
        cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
        cells.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      } else {
        cells.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
        cells.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      }
    }
  return Mesh(std::move(verts), std::move(cells), SquareDomain{1.0});
}

/// Unit disk: a six-cell hexagon fan refined `level` times.
inline Mesh triangulate_disk(std::size_t level) {
  std::vector<Point> verts{Point(0.0, 0.0)};
  for (int k = 0; k < 6; ++k) {
    double t = k * std::numbers::pi / 3.0;
    verts.emplace_back(std::cos(t), std::sin(t));
  }
  std::vector<Cell> cells;
  for (std::size_t k = 0; k < 6; ++k)
    cells.push_back({0, 1 + k, 1 + (k + 1) % 6});
  Mesh mesh(std::move(verts), std::move(cells), DiskDomain{});
  for (std::size_t l = 0; l < level; ++l)
    mesh = refine(mesh);
  return mesh;
}

/// h = max over cells of the cell diameter.
inline double meshsize(const Mesh& mesh) {
  if (mesh.num_cells() == 0)
    throw std::invalid_argument("meshsize: empty mesh");
  double h = 0.0;
  for (std::size_t c = 0; c < mesh.num_cells(); ++c)
    h = std::max(h, mesh.cell_diameter(c));
  return h;
}

/// Barycentric coordinates of p with respect to cell c.
inline Eigen::Vector3d barycentric(const Mesh& mesh, std::size_t c, const Point& p) {
  const auto& t = mesh.cells()[c];
  const Point& a = mesh.vertices()[t[0]];
  Mat2 J;
  J.col(0) = mesh.vertices()[t[1]] - a;
  J.col(1) = mesh.vertices()[t[2]] - a;
  Vec2 xi = J.inverse() * (p - a);
  return {1.0 - xi.x() - xi.y(), xi.x(), xi.y()};
}

/// Bucketed point location over a fixed mesh.
class PointLocator {
public:
  explicit PointLocator(const Mesh& mesh, double tol = 1e-10) : mesh_(&mesh), tol_(tol) {
    lo_ = hi_ = mesh.vertices().front();
    for (const auto& v : mesh.vertices()) {
      lo_ = lo_.cwiseMin(v);
      hi_ = hi_.cwiseMax(v);
    }
    nb_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(mesh.num_cells()))));
    buckets_.assign(nb_ * nb_, {});
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      Point clo = mesh.vertices()[mesh.cells()[c][0]], chi = clo;
      for (auto v : mesh.cells()[c]) {
        clo = clo.cwiseMin(mesh.vertices()[v]);
        chi = chi.cwiseMax(mesh.vertices()[v]);
      }
      auto [i0, j0] = bucket(clo);
      auto [i1, j1] = bucket(chi);
      for (std::size_t j = j0; j <= j1; ++j)
        for (std::size_t i = i0; i <= i1; ++i)
          buckets_[j * nb_ + i].push_back(c);
    }
  }

  /// Containing cell and barycentric coordinates, or nothing when p lies
  /// outside the mesh by more than the tolerance.
  std::optional<std::pair<std::size_t, Eigen::Vector3d>> locate(const Point& p) const {
    if ((p.array() < lo_.array() - tol_).any() || (p.array() > hi_.array() + tol_).any())
      return std::nullopt;
    auto [i, j] = bucket(p);
    std::optional<std::pair<std::size_t, Eigen::Vector3d>> best;
    double best_min = -1e300;
    for (auto c : buckets_[j * nb_ + i]) {
      Eigen::Vector3d l = barycentric(*mesh_, c, p);
      double m = l.minCoeff();
      if (m > best_min) {
        best_min = m;
        best = {{c, l}};
      }
      if (m >= 0.0)
        break;
    }
    if (!best || best_min < -tol_)
      return std::nullopt;
    Eigen::Vector3d l = best->second.cwiseMax(0.0);
    best->second = l / l.sum();
    return best;
  }

private:
  std::pair<std::size_t, std::size_t> bucket(const Point& p) const {
    auto idx = [&](double x, double lo, double hi) {
      double t = (hi > lo) ? (x - lo) / (hi - lo) : 0.0;
      auto k = static_cast<long>(std::floor(t * static_cast<double>(nb_)));
      return static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(nb_) - 1));
    };
    return {idx(p.x(), lo_.x(), hi_.x()), idx(p.y(), lo_.y(), hi_.y())};
  }

  const Mesh* mesh_;
  double tol_;
  Point lo_, hi_;
  std::size_t nb_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

// Plain-text mesh format:
//   vertices <count>   then "x y" lines
//   cells <count>      then "i j k" lines (0-based)
//   boundary <count>   then "i j nx ny" lines

inline void write_mesh(std::ostream& os, const Mesh& mesh) {
  os.precision(17);
  os << "vertices " << mesh.num_vertices() << '\n';
  for (const auto& v : mesh.vertices())
    os << v.x() << ' ' << v.y() << '\n';
  os << "cells " << mesh.num_cells() << '\n';
  for (const auto& c : mesh.cells())
    os << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  os << "boundary " << mesh.boundary_facets().size() << '\n';
  for (const auto& f : mesh.boundary_facets())
    os << f.vertices[0] << ' ' << f.vertices[1] << ' ' << f.normal.x() << ' ' << f.normal.y() << '\n';
}

/// Reads the plain-text format. The boundary section is recomputed from the
/// cells; it is parsed only for validation of the header.
inline Mesh read_mesh(std::istream& is, DomainTag tag = GenericDomain{}) {
  auto expect = [&](const char* key) {
    std::string word;
    std::size_t n = 0;
    if (!(is >> word >> n) || word != key)
      throw std::runtime_error(std::string("read_mesh: expected section '") + key + "'");
    return n;
  };
  std::size_t nv = expect("vertices");
  std::vector<Point> verts(nv);
  for (auto& v : verts)
    if (!(is >> v.x() >> v.y()))
      throw std::runtime_error("read_mesh: truncated vertex list");
  std::size_t nc = expect("cells");
  std::vector<Cell> cells(nc);
  for (auto& c : cells)
    if (!(is >> c[0] >> c[1] >> c[2]))
      throw std::runtime_error("read_mesh: truncated cell list");
  std::string word;
  if (is >> word && word == "boundary") {
    std::size_t nb = 0;
    is >> nb;
    for (std::size_t k = 0; k < nb; ++k) {
      std::size_t i, j;
      double nx, ny;
      if (!(is >> i >> j >> nx >> ny))
        throw std::runtime_error("read_mesh: truncated boundary list");
    }
  }
  return Mesh(std::move(verts), std::move(cells), tag);
}

inline void write_mesh(const std::string& path, const Mesh& mesh) {
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("cannot open " + path);
  write_mesh(os, mesh);
}

} // namespace maot
