#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "maot/nvfem.hpp"
#include "maot/problem.hpp"

namespace maot {

/// det M - rho(x) / sigma(p).
inline double ma_residual(const Vec2& p, const Mat2& M, const Point& x, const ProblemData& data) {
  const double s = data.sigma(p);
  if (!(s > 0.0)) {
    std::ostringstream os;
    os << "ma_residual: target density not positive at (" << p.x() << ", " << p.y() << ")";
    throw DomainError(os.str());
  }
  return M.determinant() - data.rho(x) / s;
}

/// Cof M = det(M) M^{-T}, extended to singular M.
inline Mat2 cofactor(const Mat2& M) {
  Mat2 C;
  C << M(1, 1), -M(1, 0), -M(0, 1), M(0, 0);
  return C;
}

/// Newton iterate: potential, its recovered gradient and Hessian, and the
/// zero-mean multiplier.
struct NewtonState {
  Vector u;
  RecoveredField g;
  RecoveredField H;
  double c = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  int iter = 0;
  double damping = 1.0; // step length of the last accepted step
};

/// Data of the oblique problem solved by one Newton step, sampled at the
/// assembly quadrature points, plus the right-hand sides
/// r = rho/sigma(g) - det H and s = -b(g).
struct Linearization {
  NvfemCoefficients coef;
  std::vector<double> r;
  std::vector<double> s;
  bool oblique = true; // beta . n > 0 at every boundary point
};

inline Linearization linearization_data(const FESpace& space, const NewtonState& st, const ProblemData& data,
                                        GradientMode mode) {
  Linearization L;
  const bool rec = mode == GradientMode::recovered;
  for_each_cell_point(space, cell_rule(space), [&](const QuadPoint& qp, const BasisValues& bv, auto dofs) {
    const Mat2 H = st.H.matrix_at(bv.values, dofs);
    const Vec2 v = rec ? st.g.vector_at(bv.values, dofs) : gradient_at(st.u, bv, dofs);
    const double s = data.sigma(v);
    if (!(s > 0.0)) {
      std::ostringstream os;
      os << "linearization: target density not positive at gradient (" << v.x() << ", " << v.y() << ")";
      throw DomainError(os.str());
    }
    const double ratio = data.rho(qp.x) / s;
    L.coef.A.push_back(cofactor(H));
    L.coef.b.push_back(ratio / s * data.grad_sigma(v));
    L.coef.c.push_back(0.0);
    L.r.push_back(ratio - H.determinant());
  });
  for_each_facet_point(space, facet_rule(space), [&](const QuadPoint& qp, const BasisValues& bv, auto dofs) {
    const Vec2 v = rec ? st.g.vector_at(bv.values, dofs) : gradient_at(st.u, bv, dofs);
    const Vec2 beta = data.target.grad_b(v);
    if (!(beta.dot(qp.normal) > 0.0))
      L.oblique = false;
    L.coef.beta.push_back(beta);
    L.s.push_back(-data.target.b(v));
  });
  return L;
}

namespace detail {

/// Right-hand side of the Newton system, i.e. minus the nonlinear residual.
inline Vector newton_rhs(const RecoveryOperators& ops, const NewtonState& st, const Linearization& lin,
                         GradientMode mode) {
  const FESpace& space = ops.space();
  const BlockLayout L{space.dim()};
  const auto n = to_eigen(L.n);
  Vector f(to_eigen(L.size()));
  std::size_t k = 0;
  Vector pde = load_vector(space, [&](const QuadPoint&) { return lin.r[k++]; }, Region::cells);
  k = 0;
  pde += load_vector(space, [&](const QuadPoint&) { return lin.s[k++]; }, Region::boundary);
  f.segment(to_eigen(L.u()), n) = pde - st.c * ops.total_mass;
  for (int a = 0; a < 2; ++a)
    f.segment(to_eigen(L.g(a)), n) = ops.derivative[static_cast<std::size_t>(a)] * st.u -
                                     ops.mass * st.g.components[static_cast<std::size_t>(a)];
  auto rhs = mode == GradientMode::recovered ? ops.recovered_hessian_rhs(st.g) : ops.plain_hessian_rhs(st.u);
  for (int j = 0; j < 3; ++j)
    f.segment(to_eigen(L.h(j)), n) = rhs[static_cast<std::size_t>(j)] - ops.mass * st.H.components[static_cast<std::size_t>(j)];
  f(to_eigen(L.multiplier())) = -ops.total_mass.dot(st.u);
  return f;
}

inline NewtonState advance(const NewtonState& st, const BlockFields& inc, double lambda) {
  NewtonState nx = st;
  nx.u += lambda * inc.u;
  for (std::size_t a = 0; a < 2; ++a)
    nx.g.components[a] += lambda * inc.g.components[a];
  for (std::size_t j = 0; j < 3; ++j)
    nx.H.components[j] += lambda * inc.h.components[j];
  nx.c += lambda * inc.multiplier;
  nx.damping = lambda;
  return nx;
}

} // namespace detail

/// Nonlinear residual of the discrete system (length 6N+1): the recovery
/// rows, <det H - rho/sigma(g), Phi> + <b(g), Phi>_boundary + c <1, Phi>,
/// and <u, 1>.
inline Vector nonlinear_residual(const RecoveryOperators& ops, const NewtonState& st, const ProblemData& data,
                                 GradientMode mode) {
  return -detail::newton_rhs(ops, st, linearization_data(ops.space(), st, data, mode), mode);
}

/// Sup norm of the nonlinear residual; infinity when it cannot be evaluated.
inline double residual_norm(const RecoveryOperators& ops, const NewtonState& st, const ProblemData& data,
                            GradientMode mode) {
  try {
    const double r = nonlinear_residual(ops, st, data, mode).lpNorm<Eigen::Infinity>();
    return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
  } catch (const DomainError&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// u0 = |x|^2/2 shifted to zero mean, with its recovered fields.
inline NewtonState initial_state(const RecoveryOperators& ops, GradientMode mode) {
  NewtonState st;
  st.u = interpolate(ops.space(), [](const Point& x) { return 0.5 * x.squaredNorm(); });
  st.u.array() -= ops.total_mass.dot(st.u) / ops.total_mass.sum();
  st.g = ops.gradient(st.u);
  st.H = mode == GradientMode::recovered ? ops.hessian_recovered(st.g) : ops.hessian(st.u);
  return st;
}

/// Newton increment from st: solves the linearised coupled system.
inline BlockFields newton_increment(const RecoveryOperators& ops, const NewtonState& st, const ProblemData& data,
                                    GradientMode mode, const SolverOptions& solver = {},
                                    bool* oblique = nullptr) {
  Linearization lin = linearization_data(ops.space(), st, data, mode);
  if (oblique)
    *oblique = lin.oblique;
  const BlockLayout L{ops.dim()};
  SparseMatrix E = assemble_nvfem_matrix(ops, lin.coef, mode);
  Vector f = detail::newton_rhs(ops, st, lin, mode);
  return split_block(L, solve_sparse(E, f, solver));
}

struct StepOptions {
  GradientMode mode = GradientMode::recovered;
  bool damping = true;
  SolverOptions solver{};
};

/// One Newton step with optional backtracking over 1, 1/2, 1/4, 1/8: the
/// first step length that does not increase the residual is taken, else the
/// one with the smallest residual.
inline NewtonState newton_step(const RecoveryOperators& ops, const NewtonState& st, const ProblemData& data,
                               const StepOptions& opt = {}, bool* oblique = nullptr) {
  const double r0 = std::isfinite(st.residual) ? st.residual : residual_norm(ops, st, data, opt.mode);
  BlockFields inc = newton_increment(ops, st, data, opt.mode, opt.solver, oblique);
  std::optional<NewtonState> best;
  for (double lambda : {1.0, 0.5, 0.25, 0.125}) {
    NewtonState nx = detail::advance(st, inc, lambda);
    nx.residual = residual_norm(ops, nx, data, opt.mode);
    nx.iter = st.iter + 1;
    if (!best || nx.residual < best->residual)
      best = std::move(nx);
    if (!opt.damping || best->residual <= r0)
      break;
  }
  return *best;
}

enum class SolveStatus { converged, max_iterations, diverged, failed };

inline const char* to_string(SolveStatus s) {
  switch (s) {
  case SolveStatus::converged: return "converged";
  case SolveStatus::max_iterations: return "maxiter";
  case SolveStatus::diverged: return "diverged";
  case SolveStatus::failed: return "failed";
  }
  return "unknown";
}

struct SolveOptions {
  double tol = 1e-8;
  int itermax = 50;
  bool damping = true;
  GradientMode mode = GradientMode::recovered;
  SolverOptions solver{};
  int max_increases = 3; // consecutive residual increases before giving up
};

struct SolveResult {
  NewtonState state;
  SolveStatus status = SolveStatus::failed;
  std::vector<double> history; // residual of each iterate, starting at u0
  int convexity_warnings = 0;  // iterates whose Hessian failed the nodal check
  int obliqueness_warnings = 0; // steps with beta . n <= 0 somewhere
  std::string message;

  bool converged() const { return status == SolveStatus::converged; }
};

/// Newton-Raphson loop for det D^2u = rho / sigma(grad u), b(grad u) = 0 on
/// the boundary, int u = 0.
inline SolveResult solve_maot(const RecoveryOperators& ops, const ProblemData& data, const SolveOptions& opt = {},
                              std::optional<NewtonState> start = std::nullopt) {
  check_mass_balance(ops.space(), data);
  SolveResult res;
  NewtonState st = start ? std::move(*start) : initial_state(ops, opt.mode);
  st.residual = residual_norm(ops, st, data, opt.mode);
  res.history.push_back(st.residual);
  const StepOptions so{opt.mode, opt.damping, opt.solver};
  int increases = 0;
  try {
    while (true) {
      if (!std::isfinite(st.residual)) {
        res.status = SolveStatus::diverged;
        res.message = "residual is not finite";
        break;
      }
      if (st.residual <= opt.tol) {
        res.status = SolveStatus::converged;
        break;
      }
      if (st.iter >= opt.itermax) {
        res.status = SolveStatus::max_iterations;
        break;
      }
      bool oblique = true;
      NewtonState nx = newton_step(ops, st, data, so, &oblique);
      if (!oblique)
        ++res.obliqueness_warnings;
      increases = nx.residual > st.residual ? increases + 1 : 0;
      st = std::move(nx);
      res.history.push_back(st.residual);
      if (!convexity_check(st.H))
        ++res.convexity_warnings;
      if (increases >= opt.max_increases) {
        res.status = SolveStatus::diverged;
        res.message = "residual increased on consecutive steps";
        break;
      }
    }
  } catch (const SolverError& e) {
    res.status = SolveStatus::failed;
    res.message = e.what();
  } catch (const DomainError& e) {
    res.status = SolveStatus::failed;
    res.message = e.what();
  }
  res.state = std::move(st);
  return res;
}

inline SolveResult solve_maot(const FESpace& space, const ProblemData& data, const SolveOptions& opt = {}) {
  return solve_maot(RecoveryOperators(space), data, opt);
}

} // namespace maot
