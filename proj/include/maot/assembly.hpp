#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "maot/fe_space.hpp"

namespace maot {

/// A quadrature point on a cell or a boundary facet.
struct QuadPoint {
  std::size_t entity = 0; // cell index, or boundary facet index
  std::size_t q = 0;      // index within the rule
  std::size_t cell = 0;   // cell owning the point
  Point x;
  double weight = 0.0;    // physical weight
  Vec2 normal = Vec2::Zero(); // outward normal (facets only)
};

using PointWeight = std::function<double(const QuadPoint&)>;
using PointVector = std::function<Vec2(const QuadPoint&)>;

enum class Region { cells, boundary };

/// Visits every cell quadrature point of the space's assembly rule, in cell
/// order. `f(qp, basis, dofs)`.
template <class F>
void for_each_cell_point(const FESpace& space, const QuadratureRule& rule, F&& f) {
  const auto& el = space.element();
  std::vector<Vector> values(rule.size());
  std::vector<GradientMatrix> ref(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q)
    el.evaluate(rule.points[q], values[q], ref[q]);
  BasisValues b;
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    CellGeometry g = space.geometry(c);
    auto dofs = space.cell_dofs(c);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      QuadPoint qp;
      qp.entity = qp.cell = c;
      qp.q = q;
      qp.x = g.map(rule.points[q]);
      qp.weight = rule.weights[q] * std::abs(g.det);
      b.values = values[q];
      b.gradients = ref[q] * g.inverse;
      f(qp, b, dofs);
    }
  }
}

/// Visits every boundary-facet quadrature point, in facet order. Basis values
/// are those of the owning cell.
template <class F>
void for_each_facet_point(const FESpace& space, const QuadratureRule& rule, F&& f) {
  const auto& mesh = space.mesh();
  const auto& facets = mesh.boundary_facets();
  BasisValues b;
  GradientMatrix ref;
  for (std::size_t k = 0; k < facets.size(); ++k) {
    const auto& fc = facets[k];
    const auto& t = mesh.cells()[fc.cell];
    int la = 0, lb = 0;
    for (int l = 0; l < 3; ++l) {
      if (t[static_cast<std::size_t>(l)] == fc.vertices[0]) la = l;
      if (t[static_cast<std::size_t>(l)] == fc.vertices[1]) lb = l;
    }
    CellGeometry g = space.geometry(fc.cell);
    auto dofs = space.cell_dofs(fc.cell);
    const double len = (mesh.vertices()[fc.vertices[1]] - mesh.vertices()[fc.vertices[0]]).norm();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double s = rule.points[q](1);
      Eigen::Vector3d bary = Eigen::Vector3d::Zero();
      bary(la) = 1.0 - s;
      bary(lb) = s;
      QuadPoint qp;
      qp.entity = k;
      qp.q = q;
      qp.cell = fc.cell;
      qp.x = g.map(bary);
      qp.weight = rule.weights[q] * len;
      qp.normal = fc.normal;
      space.element().evaluate(bary, b.values, ref);
      b.gradients = ref * g.inverse;
      f(qp, b, dofs);
    }
  }
}

inline QuadratureRule cell_rule(const FESpace& space) {
  return quadrature(QuadratureKind::cell, space.assembly_degree());
}
inline QuadratureRule facet_rule(const FESpace& space) {
  return quadrature(QuadratureKind::edge, space.assembly_degree());
}

/// Accumulates local contributions; duplicates are summed on finalization.
class TripletBuilder {
public:
  TripletBuilder(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  void add(std::size_t i, std::size_t j, double v) {
    if (v != 0.0)
      t_.emplace_back(static_cast<int>(i), static_cast<int>(j), v);
  }

  /// Adds `scale * block` with its top-left corner at (r0, c0).
  void add_block(std::size_t r0, std::size_t c0, const SparseMatrix& block, double scale = 1.0) {
    for (int k = 0; k < block.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(block, k); it; ++it)
        add(r0 + static_cast<std::size_t>(it.row()), c0 + static_cast<std::size_t>(it.col()),
            scale * it.value());
  }

  SparseMatrix finalize() const {
    SparseMatrix m(to_eigen(rows_), to_eigen(cols_));
    m.setFromTriplets(t_.begin(), t_.end());
    m.makeCompressed();
    return m;
  }

private:
  std::size_t rows_, cols_;
  std::vector<Triplet> t_;
};

/// Generic bilinear form: entries sum_q w * kernel(qp, basis, i, j) over the region.
template <class Kernel>
SparseMatrix assemble_bilinear(const FESpace& space, Region region, Kernel&& kernel) {
  const std::size_t n = space.dim();
  TripletBuilder tb(n, n);
  auto visit = [&](const QuadPoint& qp, const BasisValues& b, std::span<const std::size_t> dofs) {
    for (std::size_t i = 0; i < dofs.size(); ++i)
      for (std::size_t j = 0; j < dofs.size(); ++j)
        tb.add(dofs[i], dofs[j], qp.weight * kernel(qp, b, to_eigen(i), to_eigen(j)));
  };
  if (region == Region::cells)
    for_each_cell_point(space, cell_rule(space), visit);
  else
    for_each_facet_point(space, facet_rule(space), visit);
  return tb.finalize();
}

/// M_ij = <Phi_i, Phi_j>.
inline SparseMatrix mass_matrix(const FESpace& space) {
  return assemble_bilinear(space, Region::cells, [](const QuadPoint&, const BasisValues& b, auto i, auto j) {
    return b.values(i) * b.values(j);
  });
}

/// (A_alpha)_ij = <Phi_i, d_alpha Phi_j>; alpha is 0 or 1.
inline SparseMatrix derivative_matrix(const FESpace& space, int alpha) {
  return assemble_bilinear(space, Region::cells, [alpha](const QuadPoint&, const BasisValues& b, auto i, auto j) {
    return b.values(i) * b.gradients(j, alpha);
  });
}

/// (N_alpha)_ij = boundary integral of n_alpha Phi_i Phi_j.
inline SparseMatrix boundary_matrix(const FESpace& space, int alpha) {
  return assemble_bilinear(space, Region::boundary, [alpha](const QuadPoint& qp, const BasisValues& b, auto i, auto j) {
    return qp.normal(alpha) * b.values(i) * b.values(j);
  });
}

/// Boundary integral of (beta . grad Phi_j) Phi_i, gradients traced from the owning cell.
inline SparseMatrix oblique_boundary_matrix(const FESpace& space, const PointVector& beta) {
  return assemble_bilinear(space, Region::boundary, [&](const QuadPoint& qp, const BasisValues& b, auto i, auto j) {
    return b.gradients.row(j).dot(beta(qp)) * b.values(i);
  });
}

inline SparseMatrix oblique_boundary_matrix(const FESpace& space, const std::function<Vec2(const Point&)>& beta) {
  return oblique_boundary_matrix(space, PointVector([&](const QuadPoint& qp) { return beta(qp.x); }));
}

/// Integral of w Phi_i Phi_j over the cells or the boundary.
inline SparseMatrix weighted_mass(const FESpace& space, const PointWeight& w, Region region) {
  return assemble_bilinear(space, region, [&](const QuadPoint& qp, const BasisValues& b, auto i, auto j) {
    return w(qp) * b.values(i) * b.values(j);
  });
}

inline SparseMatrix weighted_mass(const FESpace& space, const std::function<double(const Point&)>& w, Region region) {
  return weighted_mass(space, PointWeight([&](const QuadPoint& qp) { return w(qp.x); }), region);
}

/// Integral of (b . grad Phi_j) Phi_i over the cells.
inline SparseMatrix advection_matrix(const FESpace& space, const PointVector& bvec) {
  return assemble_bilinear(space, Region::cells, [&](const QuadPoint& qp, const BasisValues& b, auto i, auto j) {
    return b.gradients.row(j).dot(bvec(qp)) * b.values(i);
  });
}

/// Weak second-derivative map applied to an in-space field:
/// (K_beta)_ij = -<Phi_j, d_beta Phi_i> + boundary integral of n_beta Phi_j Phi_i.
/// For g in the space, (K_beta g)_i tests d_beta g against Phi_i.
inline SparseMatrix recovered_hessian_matrix(const FESpace& space, int beta) {
  SparseMatrix vol = assemble_bilinear(space, Region::cells, [beta](const QuadPoint&, const BasisValues& b, auto i, auto j) {
    return -b.values(j) * b.gradients(i, beta);
  });
  return SparseMatrix(vol + boundary_matrix(space, beta));
}

/// Generalised-Hessian map on the potential itself:
/// (P_ab)_ij = -<d_a Phi_j, d_b Phi_i> + boundary integral of n_b d_a Phi_j Phi_i.
inline SparseMatrix plain_hessian_matrix(const FESpace& space, int a, int b) {
  SparseMatrix vol = assemble_bilinear(space, Region::cells, [a, b](const QuadPoint&, const BasisValues& bv, auto i, auto j) {
    return -bv.gradients(j, a) * bv.gradients(i, b);
  });
  SparseMatrix bdr = assemble_bilinear(space, Region::boundary, [a, b](const QuadPoint& qp, const BasisValues& bv, auto i, auto j) {
    return qp.normal(b) * bv.gradients(j, a) * bv.values(i);
  });
  return SparseMatrix(vol + bdr);
}

/// Load vector <f, Phi_i> over the cells or the boundary.
inline Vector load_vector(const FESpace& space, const PointWeight& f, Region region) {
  Vector out = Vector::Zero(to_eigen(space.dim()));
  auto visit = [&](const QuadPoint& qp, const BasisValues& b, std::span<const std::size_t> dofs) {
    const double v = qp.weight * f(qp);
    for (std::size_t i = 0; i < dofs.size(); ++i)
      out(to_eigen(dofs[i])) += v * b.values(to_eigen(i));
  };
  if (region == Region::cells)
    for_each_cell_point(space, cell_rule(space), visit);
  else
    for_each_facet_point(space, facet_rule(space), visit);
  return out;
}

/// d_i = <Phi_i, 1>.
inline Vector total_mass_vector(const FESpace& space) {
  return load_vector(space, [](const QuadPoint&) { return 1.0; }, Region::cells);
}

/// Samples a per-point quantity at every cell (or facet) quadrature point,
/// indexed entity * rule.size() + q.
template <class T, class F>
std::vector<T> sample_points(const FESpace& space, Region region, F&& f) {
  std::vector<T> out;
  auto visit = [&](const QuadPoint& qp, const BasisValues& b, std::span<const std::size_t> dofs) {
    out.push_back(f(qp, b, dofs));
  };
  if (region == Region::cells)
    for_each_cell_point(space, cell_rule(space), visit);
  else
    for_each_facet_point(space, facet_rule(space), visit);
  return out;
}

enum class SolverMethod { direct, iterative };

struct SolverOptions {
  SolverMethod method = SolverMethod::direct;
  double tolerance = 1e-10; // required relative residual
  int max_refinement = 3;
};

namespace detail {

using LUSolver = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

inline std::unique_ptr<LUSolver> factorize(const SparseMatrix& A) {
  auto lu = std::make_unique<LUSolver>();
  lu->analyzePattern(A);
  lu->factorize(A);
  if (lu->info() != Eigen::Success)
    throw SolverError("solve_sparse: LU factorization failed: " + lu->lastErrorMessage());
  return lu;
}

} // namespace detail

/// Solves A x = b. Direct: sparse LU with partial pivoting plus a few steps
/// of iterative refinement. Iterative: BiCGSTAB with an incomplete LU preconditioner.
inline Vector solve_sparse(const SparseMatrix& A, const Vector& b, const SolverOptions& opt = {}) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw std::invalid_argument("solve_sparse: dimension mismatch");
  Vector x;
  const double bnorm = b.norm();
  if (opt.method == SolverMethod::direct) {
    auto lu = detail::factorize(A);
    x = lu->solve(b);
    for (int k = 0; k < opt.max_refinement && bnorm > 0.0; ++k) {
      Vector r = b - A * x;
      if (r.norm() <= 1e-3 * opt.tolerance * bnorm)
        break;
      x += lu->solve(r);
    }
  } else {
    Eigen::BiCGSTAB<SparseMatrix, Eigen::IncompleteLUT<double>> it;
    it.preconditioner().setDroptol(1e-6);
    it.preconditioner().setFillfactor(20);
    it.setTolerance(0.1 * opt.tolerance);
    it.setMaxIterations(10000);
    it.compute(A);
    if (it.info() != Eigen::Success)
      throw SolverError("solve_sparse: incomplete LU preconditioner failed");
    x = it.solve(b);
  }
  if (!x.allFinite())
    throw SolverError("solve_sparse: non-finite solution");
  const double rnorm = (A * x - b).norm();
  if (bnorm > 0.0 ? rnorm > opt.tolerance * bnorm : rnorm > opt.tolerance)
    throw SolverError("solve_sparse: relative residual " + std::to_string(bnorm > 0 ? rnorm / bnorm : rnorm) +
                      " above tolerance");
  return x;
}

/// Coordinate text dump: "row col value" lines, 1-based.
inline void write_coordinate(std::ostream& os, const SparseMatrix& A) {
  os.precision(17);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(A, k); it; ++it)
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

} // namespace maot
