#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/LU>

#include "maot/mesh.hpp"
#include "maot/quadrature.hpp"

namespace maot {

using GradientMatrix = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Nodal Lagrange basis of degree k on the reference triangle.
///
/// Local node order: the three vertices, then k-1 nodes on each edge
/// (0,1), (1,2), (2,0) running from the first vertex to the second, then the
/// interior nodes. The basis is obtained by inverting the monomial
/// Vandermonde matrix at the nodes.
class LagrangeElement {
public:
  explicit LagrangeElement(int degree) : degree_(degree) {
    if (degree < 1 || degree > 3)
      throw std::invalid_argument("LagrangeElement: unsupported degree " + std::to_string(degree));
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b)
        exponents_.push_back({a, b});

    const double k = degree;
    nodes_ = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int l = 0; l < 3; ++l)
      for (int t = 1; t < degree; ++t) {
        Eigen::Vector3d p = Eigen::Vector3d::Zero();
        p(l) = 1.0 - t / k;
        p((l + 1) % 3) = t / k;
        nodes_.push_back(p);
      }
    if (degree == 3)
      nodes_.push_back(Eigen::Vector3d::Constant(1.0 / 3.0));

    const auto n = static_cast<Eigen::Index>(nodes_.size());
    Eigen::MatrixXd vandermonde(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index m = 0; m < n; ++m)
        vandermonde(i, m) = monomial(m, nodes_[static_cast<std::size_t>(i)](1), nodes_[static_cast<std::size_t>(i)](2));
    coeffs_ = vandermonde.inverse();
  }

  int degree() const { return degree_; }
  std::size_t num_dofs() const { return nodes_.size(); }
  const std::vector<Eigen::Vector3d>& nodes() const { return nodes_; }

  /// Values and reference-coordinate gradients at a barycentric point.
  void evaluate(const Eigen::Vector3d& bary, Vector& values, GradientMatrix& ref_grads) const {
    const double xi = bary(1), eta = bary(2);
    const auto n = static_cast<Eigen::Index>(nodes_.size());
    Vector mono(n), dxi(n), deta(n);
    for (Eigen::Index m = 0; m < n; ++m) {
      auto [a, b] = exponents_[static_cast<std::size_t>(m)];
      mono(m) = std::pow(xi, a) * std::pow(eta, b);
      dxi(m) = a > 0 ? a * std::pow(xi, a - 1) * std::pow(eta, b) : 0.0;
      deta(m) = b > 0 ? b * std::pow(xi, a) * std::pow(eta, b - 1) : 0.0;
    }
    values = coeffs_.transpose() * mono;
    ref_grads.resize(n, 2);
    ref_grads.col(0) = coeffs_.transpose() * dxi;
    ref_grads.col(1) = coeffs_.transpose() * deta;
  }

private:
  double monomial(Eigen::Index m, double xi, double eta) const {
    auto [a, b] = exponents_[static_cast<std::size_t>(m)];
    return std::pow(xi, a) * std::pow(eta, b);
  }

  int degree_;
  std::vector<std::array<int, 2>> exponents_;
  std::vector<Eigen::Vector3d> nodes_;
  Eigen::MatrixXd coeffs_;
};

/// Affine map of a cell: x = origin + jacobian * (xi, eta).
struct CellGeometry {
  Point origin;
  Mat2 jacobian;
  Mat2 inverse;
  double det;

  Point map(const Eigen::Vector3d& bary) const { return origin + jacobian * bary.tail<2>(); }
};

struct BasisValues {
  Vector values;
  GradientMatrix gradients; // physical coordinates, one row per local basis function
};

/// Continuous piecewise-P_k space over a mesh.
///
/// Global numbering: vertex nodes first (same index as the mesh vertex), then
/// k-1 nodes per edge ordered from the edge's lower to higher vertex index,
/// then interior nodes.
class FESpace {
public:
  FESpace(Mesh mesh, int degree) : mesh_(std::move(mesh)), element_(degree) {
    const std::size_t k = static_cast<std::size_t>(degree);
    const std::size_t nv = mesh_.num_vertices(), ne = mesh_.edges().size(), nc = mesh_.num_cells();
    const std::size_t per_edge = k - 1, per_cell = (k == 3) ? 1 : 0;
    dim_ = nv + per_edge * ne + per_cell * nc;
    nloc_ = element_.num_dofs();

    dof_coords_.resize(dim_);
    boundary_dof_.assign(dim_, false);
    for (std::size_t v = 0; v < nv; ++v) {
      dof_coords_[v] = mesh_.vertices()[v];
      boundary_dof_[v] = mesh_.is_boundary_vertex(v);
    }
    cell_dofs_.resize(nc * nloc_);
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& t = mesh_.cells()[c];
      std::size_t* dofs = &cell_dofs_[c * nloc_];
      for (std::size_t l = 0; l < 3; ++l)
        dofs[l] = t[l];
      std::size_t slot = 3;
      for (int l = 0; l < 3; ++l) {
        std::size_t e = mesh_.cell_edge(c, l);
        bool forward = t[static_cast<std::size_t>(l)] < t[static_cast<std::size_t>((l + 1) % 3)];
        for (std::size_t s = 0; s < per_edge; ++s) {
          std::size_t along = forward ? s : per_edge - 1 - s;
          dofs[slot++] = nv + e * per_edge + along;
        }
      }
      for (std::size_t s = 0; s < per_cell; ++s)
        dofs[slot++] = nv + per_edge * ne + c * per_cell + s;

      CellGeometry g = geometry(c);
      for (std::size_t i = 3; i < nloc_; ++i)
        dof_coords_[dofs[i]] = g.map(element_.nodes()[i]);
    }
    for (std::size_t e = 0; e < ne; ++e)
      if (mesh_.is_boundary_edge(e))
        for (std::size_t s = 0; s < per_edge; ++s)
          boundary_dof_[nv + e * per_edge + s] = true;
  }

  const Mesh& mesh() const { return mesh_; }
  int degree() const { return element_.degree(); }
  std::size_t dim() const { return dim_; }
  std::size_t dofs_per_cell() const { return nloc_; }
  const LagrangeElement& element() const { return element_; }
  const std::vector<Point>& dof_coords() const { return dof_coords_; }
  bool is_boundary_dof(std::size_t i) const { return boundary_dof_[i]; }

  std::span<const std::size_t> cell_dofs(std::size_t c) const {
    return {cell_dofs_.data() + c * nloc_, nloc_};
  }

  CellGeometry geometry(std::size_t c) const {
    const auto& t = mesh_.cells()[c];
    CellGeometry g;
    g.origin = mesh_.vertices()[t[0]];
    g.jacobian.col(0) = mesh_.vertices()[t[1]] - g.origin;
    g.jacobian.col(1) = mesh_.vertices()[t[2]] - g.origin;
    g.det = g.jacobian.determinant();
    g.inverse = g.jacobian.inverse();
    return g;
  }

  /// Exactness degree used for assembly on cells and boundary edges.
  int assembly_degree() const { return 2 * degree() + 2; }

private:
  Mesh mesh_;
  LagrangeElement element_;
  std::size_t dim_ = 0;
  std::size_t nloc_ = 0;
  std::vector<Point> dof_coords_;
  std::vector<std::size_t> cell_dofs_;
  std::vector<bool> boundary_dof_;
};

inline FESpace build_space(const Mesh& mesh, int degree) { return FESpace(mesh, degree); }

/// Local basis values and physical gradients at a barycentric point of a cell.
inline BasisValues eval_basis(const FESpace& space, std::size_t cell, const Eigen::Vector3d& bary) {
  if (cell >= space.mesh().num_cells())
    throw std::out_of_range("eval_basis: cell index " + std::to_string(cell) + " out of range");
  BasisValues b;
  GradientMatrix ref;
  space.element().evaluate(bary, b.values, ref);
  b.gradients = ref * space.geometry(cell).inverse;
  return b;
}

/// Nodal interpolant.
inline Vector interpolate(const FESpace& space, const std::function<double(const Point&)>& f) {
  Vector u(to_eigen(space.dim()));
  for (std::size_t i = 0; i < space.dim(); ++i)
    u(to_eigen(i)) = f(space.dof_coords()[i]);
  return u;
}

inline double evaluate(const FESpace& space, const Vector& coeffs, std::size_t cell,
                       const Eigen::Vector3d& bary) {
  BasisValues b = eval_basis(space, cell, bary);
  double s = 0.0;
  auto dofs = space.cell_dofs(cell);
  for (std::size_t i = 0; i < dofs.size(); ++i)
    s += coeffs(to_eigen(dofs[i])) * b.values(to_eigen(i));
  return s;
}

inline Vec2 evaluate_gradient(const FESpace& space, const Vector& coeffs, std::size_t cell,
                              const Eigen::Vector3d& bary) {
  BasisValues b = eval_basis(space, cell, bary);
  Vec2 g = Vec2::Zero();
  auto dofs = space.cell_dofs(cell);
  for (std::size_t i = 0; i < dofs.size(); ++i)
    g += coeffs(to_eigen(dofs[i])) * b.gradients.row(to_eigen(i)).transpose();
  return g;
}

} // namespace maot
