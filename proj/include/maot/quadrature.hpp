#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "maot/types.hpp"

namespace maot {

enum class QuadratureKind { cell, edge };

/// Points are barycentric; edge rules use (1-t, t, 0). Weights sum to the
/// reference measure (1/2 for the triangle, 1 for the segment).
struct QuadratureRule {
  QuadratureKind kind = QuadratureKind::cell;
  int degree = 0;
  std::vector<Eigen::Vector3d> points;
  std::vector<double> weights;

  std::size_t size() const { return points.size(); }
};

/// n-point Gauss-Legendre rule on [0,1] (Golub-Welsch).
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    double b = i / std::sqrt(4.0 * i * i - 1.0);
    jacobi(i, i - 1) = jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x[static_cast<std::size_t>(i)] = 0.5 * (eig.eigenvalues()(i) + 1.0);
    double v = eig.eigenvectors()(0, i);
    w[static_cast<std::size_t>(i)] = v * v; // 2 v^2 on [-1,1], halved for [0,1]
  }
  return {x, w};
}

/// Rule exact for polynomials of total degree `exactness_degree` (0..10).
/// Triangle rules are collapsed (Duffy) Gauss products.
inline QuadratureRule quadrature(QuadratureKind kind, int exactness_degree) {
  if (exactness_degree < 0 || exactness_degree > 10)
    throw std::invalid_argument("quadrature: unsupported exactness degree " +
                                std::to_string(exactness_degree));
  QuadratureRule rule;
  rule.kind = kind;
  rule.degree = exactness_degree;
  if (kind == QuadratureKind::edge) {
    auto [x, w] = gauss_legendre(exactness_degree / 2 + 1);
    for (std::size_t i = 0; i < x.size(); ++i) {
      rule.points.emplace_back(1.0 - x[i], x[i], 0.0);
      rule.weights.push_back(w[i]);
    }
    return rule;
  }
  // The collapse adds one degree in the radial direction.
  auto [x, w] = gauss_legendre((exactness_degree + 1) / 2 + 1);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) {
      double xi = x[i];
      double eta = (1.0 - x[i]) * x[j];
      rule.points.emplace_back(1.0 - xi - eta, xi, eta);
      rule.weights.push_back(w[i] * w[j] * (1.0 - x[i]));
    }
  return rule;
}

} // namespace maot
