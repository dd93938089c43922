#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseCholesky>

#include "maot/assembly.hpp"

namespace maot {

/// Coefficient vectors of a vector field (2 components) or a symmetric
/// matrix field (3 components, ordered (1,1), (1,2), (2,2)) over an FE space.
struct RecoveredField {
  std::vector<Vector> components;

  std::size_t size() const { return components.size(); }

  Vec2 vector_at(std::size_t dof) const {
    return {components[0](to_eigen(dof)), components[1](to_eigen(dof))};
  }

  Mat2 matrix_at(std::size_t dof) const {
    const auto i = to_eigen(dof);
    Mat2 m;
    m << components[0](i), components[1](i), components[1](i), components[2](i);
    return m;
  }

  /// Value at a point given the local basis values there.
  Vec2 vector_at(const Vector& basis, std::span<const std::size_t> dofs) const {
    Vec2 v = Vec2::Zero();
    for (std::size_t i = 0; i < dofs.size(); ++i)
      v += basis(to_eigen(i)) * vector_at(dofs[i]);
    return v;
  }

  Mat2 matrix_at(const Vector& basis, std::span<const std::size_t> dofs) const {
    Mat2 m = Mat2::Zero();
    for (std::size_t i = 0; i < dofs.size(); ++i)
      m += basis(to_eigen(i)) * matrix_at(dofs[i]);
    return m;
  }
};

inline Vec2 gradient_at(const Vector& u, const BasisValues& b, std::span<const std::size_t> dofs) {
  Vec2 g = Vec2::Zero();
  for (std::size_t i = 0; i < dofs.size(); ++i)
    g += u(to_eigen(dofs[i])) * b.gradients.row(to_eigen(i)).transpose();
  return g;
}

inline double value_at(const Vector& u, const BasisValues& b, std::span<const std::size_t> dofs) {
  double s = 0.0;
  for (std::size_t i = 0; i < dofs.size(); ++i)
    s += u(to_eigen(dofs[i])) * b.values(to_eigen(i));
  return s;
}

/// The linear operators shared by recovery, the oblique solver and the
/// Newton system, assembled once per space.
///
/// Hessian recovery uses the weak form
///   <H_ab, Phi> = -<v_a, d_b Phi> + boundary integral of v_a n_b Phi,
/// with v = grad u (plain) or v = G u (recovered). The (1,2) entry is the
/// average of the (1,2) and (2,1) assemblies.
class RecoveryOperators {
public:
  explicit RecoveryOperators(const FESpace& space) : space_(&space) {
    mass = mass_matrix(space);
    total_mass = total_mass_vector(space);
    for (int a = 0; a < 2; ++a) {
      derivative[a] = derivative_matrix(space, a);
      boundary[a] = boundary_matrix(space, a);
      weak_hessian[a] = recovered_hessian_matrix(space, a);
    }
    SparseMatrix p12 = plain_hessian_matrix(space, 0, 1);
    SparseMatrix p21 = plain_hessian_matrix(space, 1, 0);
    plain_hessian[0] = plain_hessian_matrix(space, 0, 0);
    plain_hessian[1] = 0.5 * (p12 + p21);
    plain_hessian[2] = plain_hessian_matrix(space, 1, 1);
    mass_solver_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(mass);
    if (mass_solver_->info() != Eigen::Success)
      throw SolverError("RecoveryOperators: mass matrix factorization failed");
  }

  const FESpace& space() const { return *space_; }
  std::size_t dim() const { return space_->dim(); }

  Vector solve_mass(const Vector& rhs) const {
    Vector x = mass_solver_->solve(rhs);
    if (mass_solver_->info() != Eigen::Success || !x.allFinite())
      throw SolverError("RecoveryOperators: mass solve failed");
    return x;
  }

  /// Right-hand sides of the three Hessian rows for a recovered gradient g.
  std::array<Vector, 3> recovered_hessian_rhs(const RecoveredField& g) const {
    return {weak_hessian[0] * g.components[0],
            0.5 * (weak_hessian[1] * g.components[0] + weak_hessian[0] * g.components[1]),
            weak_hessian[1] * g.components[1]};
  }

  std::array<Vector, 3> plain_hessian_rhs(const Vector& u) const {
    return {plain_hessian[0] * u, plain_hessian[1] * u, plain_hessian[2] * u};
  }

  RecoveredField gradient(const Vector& u) const {
    check_size(u);
    return {{solve_mass(derivative[0] * u), solve_mass(derivative[1] * u)}};
  }

  RecoveredField hessian(const Vector& u) const {
    check_size(u);
    auto rhs = plain_hessian_rhs(u);
    return {{solve_mass(rhs[0]), solve_mass(rhs[1]), solve_mass(rhs[2])}};
  }

  RecoveredField hessian_recovered(const RecoveredField& g) const {
    if (g.size() != 2)
      throw std::invalid_argument("hessian_recovered: expected a 2-component gradient");
    auto rhs = recovered_hessian_rhs(g);
    return {{solve_mass(rhs[0]), solve_mass(rhs[1]), solve_mass(rhs[2])}};
  }

  SparseMatrix mass;
  Vector total_mass;
  std::array<SparseMatrix, 2> derivative;   // A_alpha
  std::array<SparseMatrix, 2> boundary;     // N_alpha
  std::array<SparseMatrix, 2> weak_hessian; // K_beta = N_beta - A_beta^T
  std::array<SparseMatrix, 3> plain_hessian;

private:
  void check_size(const Vector& u) const {
    if (static_cast<std::size_t>(u.size()) != dim())
      throw std::invalid_argument("recovery: coefficient vector has wrong length");
  }

  const FESpace* space_;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> mass_solver_;
};

/// Projection-based gradient recovery: M g_alpha = A_alpha u.
inline RecoveredField recover_gradient(const FESpace& space, const Vector& u) {
  return RecoveryOperators(space).gradient(u);
}

/// Finite element Hessian of u.
inline RecoveredField fe_hessian(const FESpace& space, const Vector& u) {
  return RecoveryOperators(space).hessian(u);
}

/// Finite element Hessian built from a recovered gradient g.
inline RecoveredField fe_hessian_recovered(const FESpace& space, const RecoveredField& g) {
  return RecoveryOperators(space).hessian_recovered(g);
}

/// Nodal positive-definiteness of a symmetric matrix field.
inline bool convexity_check(const RecoveredField& H) {
  if (H.size() != 3)
    throw std::invalid_argument("convexity_check: expected 3 components");
  for (Eigen::Index i = 0; i < H.components[0].size(); ++i) {
    const double a = H.components[0](i), b = H.components[1](i), d = H.components[2](i);
    if (!(a > 0.0 && a * d - b * b > 0.0))
      return false;
  }
  return true;
}

} // namespace maot
