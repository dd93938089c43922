#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace maot {

using Point = Eigen::Vector2d;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Raised when a linear solve or factorization fails.
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when a coefficient is evaluated outside its admissible domain,
/// e.g. a target density queried where it is not positive.
class DomainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline Eigen::Index to_eigen(std::size_t i) { return static_cast<Eigen::Index>(i); }

inline double frobenius(const Mat2& a, const Mat2& b) { return (a.array() * b.array()).sum(); }

} // namespace maot
