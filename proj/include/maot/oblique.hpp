#pragma once

#include <functional>
#include <sstream>

#include "maot/nvfem.hpp"

namespace maot {

/// A : D^2u + b . grad u + c u = r in the domain, beta . grad u = s on the
/// boundary, with A uniformly elliptic, c <= 0 and beta oblique (beta.n > 0).
struct LinearObliqueProblem {
  std::function<Mat2(const Point&)> A = [](const Point&) { return Mat2::Identity().eval(); };
  std::function<Vec2(const Point&)> b = [](const Point&) { return Vec2::Zero().eval(); };
  std::function<double(const Point&)> c = [](const Point&) { return 0.0; };
  std::function<double(const Point&)> r = [](const Point&) { return 0.0; };
  /// Receives the boundary point and the outward facet normal there.
  std::function<Vec2(const Point&, const Vec2&)> beta = [](const Point&, const Vec2& n) { return n; };
  std::function<double(const Point&, const Vec2&)> s = [](const Point&, const Vec2&) { return 0.0; };
};

struct ObliqueSolution {
  Vector u;
  RecoveredField gradient; // recovered gradient of u
  RecoveredField hessian;
  double multiplier = 0.0;
};

struct ObliqueOptions {
  GradientMode mode = GradientMode::recovered;
  SolverOptions solver{};
};

/// Samples and validates the problem coefficients at the assembly points.
inline NvfemCoefficients sample_coefficients(const FESpace& space, const LinearObliqueProblem& p) {
  NvfemCoefficients k;
  for_each_cell_point(space, cell_rule(space), [&](const QuadPoint& qp, const BasisValues&, auto) {
    Mat2 A = p.A(qp.x);
    if (std::abs(A(0, 1) - A(1, 0)) > 1e-12 * (1.0 + A.norm()) || !(A(0, 0) > 0.0 && A.determinant() > 0.0)) {
      std::ostringstream os;
      os << "solve_oblique: A is not symmetric positive definite at (" << qp.x.x() << ", " << qp.x.y() << ")";
      throw std::invalid_argument(os.str());
    }
    double c = p.c(qp.x);
    if (c > 0.0)
      throw std::invalid_argument("solve_oblique: zeroth-order coefficient must be nonpositive");
    k.A.push_back(A);
    k.b.push_back(p.b(qp.x));
    k.c.push_back(c);
  });
  for_each_facet_point(space, facet_rule(space), [&](const QuadPoint& qp, const BasisValues&, auto) {
    Vec2 beta = p.beta(qp.x, qp.normal);
    if (!(beta.dot(qp.normal) > 0.0)) {
      std::ostringstream os;
      os << "solve_oblique: beta is not oblique at (" << qp.x.x() << ", " << qp.x.y()
         << "), beta.n = " << beta.dot(qp.normal);
      throw std::invalid_argument(os.str());
    }
    k.beta.push_back(beta);
  });
  return k;
}

/// Assembles the coupled NVFEM system for a linear oblique problem.
inline BlockSystem assemble_oblique(const RecoveryOperators& ops, const LinearObliqueProblem& p, GradientMode mode) {
  const FESpace& space = ops.space();
  BlockSystem sys;
  sys.layout = {space.dim()};
  sys.E = assemble_nvfem_matrix(ops, sample_coefficients(space, p), mode);
  sys.f = Vector::Zero(to_eigen(sys.layout.size()));
  sys.f.head(to_eigen(space.dim())) =
      load_vector(space, [&](const QuadPoint& qp) { return p.r(qp.x); }, Region::cells) +
      load_vector(space, [&](const QuadPoint& qp) { return p.s(qp.x, qp.normal); }, Region::boundary);
  return sys;
}

inline ObliqueSolution solve_oblique(const RecoveryOperators& ops, const LinearObliqueProblem& p,
                                     const ObliqueOptions& opt = {}) {
  BlockSystem sys = assemble_oblique(ops, p, opt.mode);
  BlockFields f = split_block(sys.layout, solve_sparse(sys.E, sys.f, opt.solver));
  return {std::move(f.u), std::move(f.g), std::move(f.h), f.multiplier};
}

inline ObliqueSolution solve_oblique(const FESpace& space, const LinearObliqueProblem& p,
                                     const ObliqueOptions& opt = {}) {
  return solve_oblique(RecoveryOperators(space), p, opt);
}

} // namespace maot
