#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <variant>

#include "maot/assembly.hpp"

namespace maot {

struct CircleShape {
  Point center{0.0, 0.0};
  double radius = 1.0;
};

/// Axis-aligned ellipse (x/a)^2 + (y/b)^2 <= 1 centred at the origin.
struct EllipseShape {
  double a = 1.0;
  double b = 1.0;
};

/// Axis-aligned square of the given side centred at the origin.
struct BoxShape {
  double side = 1.0;
};

struct GenericShape {};

using ShapeTag = std::variant<GenericShape, CircleShape, EllipseShape, BoxShape>;

/// Target set Y = {b < 0} with boundary {b = 0}.
struct DefiningFunction {
  std::function<double(const Vec2&)> b;
  std::function<Vec2(const Vec2&)> grad_b;
  ShapeTag shape;
};

inline DefiningFunction make_circle_target(double radius, Point center = Point::Zero()) {
  if (!(radius > 0.0))
    throw std::invalid_argument("make_circle_target: radius must be positive");
  DefiningFunction f;
  f.b = [=](const Vec2& p) { return (p - center).norm() - radius; };
  f.grad_b = [=](const Vec2& p) -> Vec2 {
    Vec2 d = p - center;
    double r = d.norm();
    if (r == 0.0)
      return {1.0, 0.0};
    return d / r;
  };
  f.shape = CircleShape{center, radius};
  return f;
}

/// Closest point on the ellipse (x/a)^2 + (y/b)^2 = 1 to p.
///
/// In the first quadrant the closest point is q_i = e_i^2 z_i / (t + e_i^2)
/// where t is the root of F(t) = sum (e_i z_i / (t + e_i^2))^2 - 1. F is
/// convex and decreasing past -e_min^2, so Newton started to the left of the
/// root climbs to it monotonically.
inline Point ellipse_projection(double a, double b, const Point& p) {
  const Vec2 e{a, b};
  const Vec2 z = p.cwiseAbs();
  const int M = a >= b ? 0 : 1, m = 1 - M;
  Vec2 q;
  if (z(m) == 0.0) {
    const double span = e(M) * e(M) - e(m) * e(m);
    if (e(M) * z(M) < span) {
      q(M) = e(M) * e(M) * z(M) / span;
      q(m) = e(m) * std::sqrt(std::max(0.0, 1.0 - (q(M) / e(M)) * (q(M) / e(M))));
    } else {
      q(M) = e(M);
      q(m) = 0.0;
    }
  } else {
    // Root of F(s) = (e_m z_m / s)^2 + (e_M z_M / (s + d))^2 - 1 with s = t + e_m^2,
    // bracketed by F(e_m z_m) >= 0 >= F(|(e_m z_m, e_M z_M)|).
    const double d = e(M) * e(M) - e(m) * e(m);
    const double am = e(m) * z(m), aM = e(M) * z(M);
    double lo = am, hi = std::hypot(am, aM);
    auto F = [&](double s) { return (am / s) * (am / s) + (aM / (s + d)) * (aM / (s + d)) - 1.0; };
    double s = lo;
    int it = 0;
    for (; it < 50 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
      const double f = F(s);
      if (f == 0.0)
        break;
      (f > 0.0 ? lo : hi) = s;
      const double rm = am / s, rM = aM / (s + d);
      const double df = -2.0 * (rm * rm / s + rM * rM / (s + d));
      const double next = s - f / df;
      const double prev = s;
      s = next > lo && next < hi ? next : 0.5 * (lo + hi);
      if (std::abs(s - prev) <= 4.0 * std::numeric_limits<double>::epsilon() * s)
        break;
    }
    if (it == 50) {
      std::ostringstream os;
      os << "ellipse_projection: no convergence for point (" << p.x() << ", " << p.y() << ")";
      throw DomainError(os.str());
    }
    q(m) = e(m) * am / s;
    q(M) = e(M) * aM / (s + d);
  }
  return {std::copysign(q(0), p.x()), std::copysign(q(1), p.y())};
}

/// Signed distance to the ellipse with semi-axes a (along x) and b_axis (along y).
/// The gradient is the unit normal at the closest point.
inline DefiningFunction make_ellipse_target(double a, double b_axis) {
  if (!(a > 0.0 && b_axis > 0.0))
    throw std::invalid_argument("make_ellipse_target: semi-axes must be positive");
  DefiningFunction f;
  f.b = [=](const Vec2& p) {
    const Point q = ellipse_projection(a, b_axis, p);
    const double inside = (p.x() / a) * (p.x() / a) + (p.y() / b_axis) * (p.y() / b_axis) - 1.0;
    const double d = (p - q).norm();
    return inside < 0.0 ? -d : d;
  };
  f.grad_b = [=](const Vec2& p) -> Vec2 {
    const Point q = ellipse_projection(a, b_axis, p);
    return Vec2(q.x() / (a * a), q.y() / (b_axis * b_axis)).normalized();
  };
  f.shape = EllipseShape{a, b_axis};
  return f;
}

/// Max-norm defining function of the square (-side/2, side/2)^2. The gradient
/// is the normal of the dominant side; at |p1| = |p2| the side of the larger
/// signed coordinate wins, then the first.
inline DefiningFunction make_box_target(double side = 1.0) {
  if (!(side > 0.0))
    throw std::invalid_argument("make_box_target: side must be positive");
  DefiningFunction f;
  f.b = [=](const Vec2& p) { return std::max(std::abs(p.x()), std::abs(p.y())) - 0.5 * side; };
  f.grad_b = [](const Vec2& p) -> Vec2 {
    const double ax = std::abs(p.x()), ay = std::abs(p.y());
    const bool first = ax > ay || (ax == ay && p.x() >= p.y());
    if (first)
      return {p.x() < 0.0 ? -1.0 : 1.0, 0.0};
    return {0.0, p.y() < 0.0 ? -1.0 : 1.0};
  };
  f.shape = BoxShape{side};
  return f;
}

/// Source density rho on the domain, target density sigma with its gradient
/// (both evaluable slightly outside Y), and the target's defining function.
struct ProblemData {
  std::function<double(const Point&)> rho = [](const Point&) { return 1.0; };
  std::function<double(const Vec2&)> sigma = [](const Vec2&) { return 1.0; };
  std::function<Vec2(const Vec2&)> grad_sigma = [](const Vec2&) { return Vec2::Zero().eval(); };
  DefiningFunction target = make_circle_target(1.0);
  /// Set when the densities balance exactly by construction (e.g. sigma is
  /// the mean of a piecewise rho), which skips the quadrature check.
  bool mass_balanced_by_construction = false;
};

namespace detail {

/// Integral of f over an ellipse with semi-axes (a, b) in polar coordinates.
inline double integrate_ellipse(const Point& c, double a, double b, const std::function<double(const Point&)>& f) {
  auto [r, w] = gauss_legendre(24);
  const int nt = 256;
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i)
    for (int k = 0; k < nt; ++k) {
      const double th = 2.0 * std::numbers::pi * (k + 0.5) / nt;
      s += w[i] * r[i] * f(c + Point(a * r[i] * std::cos(th), b * r[i] * std::sin(th)));
    }
  return s * a * b * 2.0 * std::numbers::pi / nt;
}

inline double integrate_square(double side, const std::function<double(const Point&)>& f) {
  auto [x, w] = gauss_legendre(24);
  const int nb = 16;
  const double hb = side / nb;
  double s = 0.0;
  for (int bi = 0; bi < nb; ++bi)
    for (int bj = 0; bj < nb; ++bj)
      for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j)
          s += w[i] * w[j] *
               f(Point(-0.5 * side + hb * (bi + x[i]), -0.5 * side + hb * (bj + x[j])));
  return s * hb * hb;
}

} // namespace detail

/// Integral of rho over the true source domain (or over the mesh when the
/// domain is generic).
inline double source_mass(const FESpace& space, const ProblemData& data) {
  const auto& tag = space.mesh().domain();
  if (auto d = std::get_if<DiskDomain>(&tag))
    return detail::integrate_ellipse(d->center, d->radius, d->radius, data.rho);
  if (auto s = std::get_if<SquareDomain>(&tag))
    return detail::integrate_square(s->side, data.rho);
  return load_vector(space, [&](const QuadPoint& qp) { return data.rho(qp.x); }, Region::cells).sum();
}

/// Integral of sigma over the target. Generic shapes have no integrator.
inline double target_mass(const ProblemData& data) {
  const auto& tag = data.target.shape;
  if (auto c = std::get_if<CircleShape>(&tag))
    return detail::integrate_ellipse(c->center, c->radius, c->radius, data.sigma);
  if (auto e = std::get_if<EllipseShape>(&tag))
    return detail::integrate_ellipse(Point::Zero(), e->a, e->b, data.sigma);
  if (auto b = std::get_if<BoxShape>(&tag))
    return detail::integrate_square(b->side, data.sigma);
  throw std::invalid_argument("target_mass: generic target shape has no integrator");
}

/// |int rho - int sigma| / int rho.
inline double mass_imbalance(const FESpace& space, const ProblemData& data) {
  const double m = source_mass(space, data);
  return std::abs(m - target_mass(data)) / std::abs(m);
}

/// Throws unless the densities balance to the given relative tolerance.
inline void check_mass_balance(const FESpace& space, const ProblemData& data, double tol = 1e-6) {
  if (data.mass_balanced_by_construction || std::holds_alternative<GenericShape>(data.target.shape))
    return;
  const double e = mass_imbalance(space, data);
  if (!(e <= tol)) {
    std::ostringstream os;
    os << "problem data: source and target masses differ (relative imbalance " << e << ")";
    throw DomainError(os.str());
  }
}

} // namespace maot
