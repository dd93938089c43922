#pragma once

#include <vector>

#include "maot/recovery.hpp"

namespace maot {

/// Which gradient enters the first-order and boundary terms, and which
/// Hessian the PDE row sees: the plain FE gradient with the plain FE
/// Hessian, or the recovered gradient with the Hessian built from it.
enum class GradientMode { plain, recovered };

/// Unknown ordering of the coupled system: [u | g1 g2 | h11 h12 h22 | c].
struct BlockLayout {
  std::size_t n = 0;

  std::size_t u() const { return 0; }
  std::size_t g(int alpha) const { return n * static_cast<std::size_t>(1 + alpha); }
  std::size_t h(int k) const { return n * static_cast<std::size_t>(3 + k); }
  std::size_t multiplier() const { return 6 * n; }
  std::size_t size() const { return 6 * n + 1; }
};

struct BlockSystem {
  BlockLayout layout;
  SparseMatrix E;
  Vector f;
};

/// Coefficients of the nondivergence operator A:D^2 + b.grad + c and of the
/// oblique boundary operator beta.grad, sampled at the assembly quadrature
/// points (cells: index cell * nq + q, facets: facet * nq + q).
struct NvfemCoefficients {
  std::vector<Mat2> A;
  std::vector<Vec2> b;
  std::vector<double> c;
  std::vector<Vec2> beta;
};

/// Coupled system matrix:
///   rows g_a : M g_a - A_a u = .
///   rows h_k : M h_k - (Hessian map of g or u) = .
///   rows u   : <A:H + b.v + c u, Phi> + <beta.v, Phi>_boundary + c_mult <1, Phi> = .
///   row  c   : <u, 1> = .
/// with v = g (recovered) or v = grad u (plain).
inline SparseMatrix assemble_nvfem_matrix(const RecoveryOperators& ops, const NvfemCoefficients& coef,
                                          GradientMode mode) {
  const FESpace& space = ops.space();
  const BlockLayout L{space.dim()};
  const QuadratureRule crule = cell_rule(space), frule = facet_rule(space);
  if (coef.A.size() != space.mesh().num_cells() * crule.size() || coef.b.size() != coef.A.size() ||
      coef.c.size() != coef.A.size() || coef.beta.size() != space.mesh().boundary_facets().size() * frule.size())
    throw std::invalid_argument("assemble_nvfem_matrix: coefficient sample count mismatch");

  TripletBuilder tb(L.size(), L.size());
  const bool recovered = mode == GradientMode::recovered;

  for_each_cell_point(space, crule, [&](const QuadPoint& qp, const BasisValues& bv, std::span<const std::size_t> dofs) {
    const std::size_t idx = qp.entity * crule.size() + qp.q;
    const Mat2& A = coef.A[idx];
    const Vec2& b = coef.b[idx];
    const double c = coef.c[idx];
    const double a00 = A(0, 0), a01 = A(0, 1) + A(1, 0), a11 = A(1, 1);
    for (std::size_t i = 0; i < dofs.size(); ++i) {
      const double wi = qp.weight * bv.values(to_eigen(i));
      for (std::size_t j = 0; j < dofs.size(); ++j) {
        const double pj = bv.values(to_eigen(j));
        const std::size_t row = L.u() + dofs[i], col = dofs[j];
        tb.add(row, L.h(0) + col, wi * a00 * pj);
        tb.add(row, L.h(1) + col, wi * a01 * pj);
        tb.add(row, L.h(2) + col, wi * a11 * pj);
        if (recovered) {
          tb.add(row, L.g(0) + col, wi * b(0) * pj);
          tb.add(row, L.g(1) + col, wi * b(1) * pj);
        } else {
          tb.add(row, L.u() + col, wi * bv.gradients.row(to_eigen(j)).dot(b));
        }
        tb.add(row, L.u() + col, wi * c * pj);
      }
    }
  });

  for_each_facet_point(space, frule, [&](const QuadPoint& qp, const BasisValues& bv, std::span<const std::size_t> dofs) {
    const Vec2& beta = coef.beta[qp.entity * frule.size() + qp.q];
    for (std::size_t i = 0; i < dofs.size(); ++i) {
      const double wi = qp.weight * bv.values(to_eigen(i));
      for (std::size_t j = 0; j < dofs.size(); ++j) {
        const std::size_t row = L.u() + dofs[i], col = dofs[j];
        if (recovered) {
          tb.add(row, L.g(0) + col, wi * beta(0) * bv.values(to_eigen(j)));
          tb.add(row, L.g(1) + col, wi * beta(1) * bv.values(to_eigen(j)));
        } else {
          tb.add(row, L.u() + col, wi * bv.gradients.row(to_eigen(j)).dot(beta));
        }
      }
    }
  });

  for (std::size_t i = 0; i < L.n; ++i) {
    const double di = ops.total_mass(to_eigen(i));
    tb.add(L.u() + i, L.multiplier(), di);
    tb.add(L.multiplier(), L.u() + i, di);
  }

  for (int a = 0; a < 2; ++a) {
    tb.add_block(L.g(a), L.g(a), ops.mass);
    tb.add_block(L.g(a), L.u(), ops.derivative[static_cast<std::size_t>(a)], -1.0);
  }
  for (int k = 0; k < 3; ++k)
    tb.add_block(L.h(k), L.h(k), ops.mass);
  if (recovered) {
    tb.add_block(L.h(0), L.g(0), ops.weak_hessian[0], -1.0);
    tb.add_block(L.h(1), L.g(0), ops.weak_hessian[1], -0.5);
    tb.add_block(L.h(1), L.g(1), ops.weak_hessian[0], -0.5);
    tb.add_block(L.h(2), L.g(1), ops.weak_hessian[1], -1.0);
  } else {
    for (int k = 0; k < 3; ++k)
      tb.add_block(L.h(k), L.u(), ops.plain_hessian[static_cast<std::size_t>(k)], -1.0);
  }
  return tb.finalize();
}

/// Splits a solution vector of the coupled system into its fields.
struct BlockFields {
  Vector u;
  RecoveredField g;
  RecoveredField h;
  double multiplier = 0.0;
};

inline BlockFields split_block(const BlockLayout& L, const Vector& x) {
  const auto n = to_eigen(L.n);
  BlockFields f;
  f.u = x.segment(to_eigen(L.u()), n);
  f.g.components = {x.segment(to_eigen(L.g(0)), n), x.segment(to_eigen(L.g(1)), n)};
  f.h.components = {x.segment(to_eigen(L.h(0)), n), x.segment(to_eigen(L.h(1)), n), x.segment(to_eigen(L.h(2)), n)};
  f.multiplier = x(to_eigen(L.multiplier()));
  return f;
}

inline Vector join_block(const BlockLayout& L, const BlockFields& f) {
  const auto n = to_eigen(L.n);
  Vector x(to_eigen(L.size()));
  x.segment(to_eigen(L.u()), n) = f.u;
  for (int a = 0; a < 2; ++a)
    x.segment(to_eigen(L.g(a)), n) = f.g.components[static_cast<std::size_t>(a)];
  for (int k = 0; k < 3; ++k)
    x.segment(to_eigen(L.h(k)), n) = f.h.components[static_cast<std::size_t>(k)];
  x(to_eigen(L.multiplier())) = f.multiplier;
  return x;
}

} // namespace maot
