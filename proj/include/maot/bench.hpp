#pragma once

#include <array>
#include <charconv>
#include <functional>
#include <cmath>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "maot/monge_ampere.hpp"
#include "maot/oblique.hpp"

namespace maot {

/// A benchmark solution with its first and second derivatives.
struct ExactSolution {
  std::function<double(const Point&)> u;
  std::function<Vec2(const Point&)> grad;
  std::function<Mat2(const Point&)> hess;
};

struct ErrorNorms {
  double l2 = 0.0;      // u - U, both shifted to zero mean over the mesh
  double h1 = 0.0;      // grad u - grad U (broken gradient)
  double recgrad = 0.0; // grad u - g
  double hess = 0.0;    // D^2u - H, Frobenius
};

/// Quadrature norms over the mesh. Both potentials are compared after
/// removing their mesh means, since solutions are fixed only up to a constant.
inline ErrorNorms error_norms(const FESpace& space, const Vector& u, const RecoveredField& g, const RecoveredField& H,
                              const ExactSolution& exact) {
  const QuadratureRule rule = cell_rule(space);
  double area = 0.0, mean_u = 0.0, mean_e = 0.0;
  for_each_cell_point(space, rule, [&](const QuadPoint& qp, const BasisValues& b, auto dofs) {
    area += qp.weight;
    mean_u += qp.weight * value_at(u, b, dofs);
    mean_e += qp.weight * exact.u(qp.x);
  });
  mean_u /= area;
  mean_e /= area;
  ErrorNorms e;
  for_each_cell_point(space, rule, [&](const QuadPoint& qp, const BasisValues& b, auto dofs) {
    const double du = (value_at(u, b, dofs) - mean_u) - (exact.u(qp.x) - mean_e);
    const Vec2 gx = exact.grad(qp.x);
    e.l2 += qp.weight * du * du;
    e.h1 += qp.weight * (gx - gradient_at(u, b, dofs)).squaredNorm();
    e.recgrad += qp.weight * (gx - g.vector_at(b.values, dofs)).squaredNorm();
    e.hess += qp.weight * (exact.hess(qp.x) - H.matrix_at(b.values, dofs)).squaredNorm();
  });
  e.l2 = std::sqrt(e.l2);
  e.h1 = std::sqrt(e.h1);
  e.recgrad = std::sqrt(e.recgrad);
  e.hess = std::sqrt(e.hess);
  return e;
}

inline ErrorNorms error_norms(const FESpace& space, const NewtonState& st, const ExactSolution& exact) {
  return error_norms(space, st.u, st.g, st.H, exact);
}

/// EOC_m = log(e_{m+1}/e_m) / log(h_{m+1}/h_m).
inline std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& hs) {
  if (errors.size() != hs.size() || errors.size() < 2)
    throw std::invalid_argument("eoc: need two or more errors and mesh sizes of equal count");
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!(errors[i] > 0.0) || !(hs[i] > 0.0))
      throw std::invalid_argument("eoc: errors and mesh sizes must be positive");
  std::vector<double> r;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i)
    r.push_back(std::log(errors[i + 1] / errors[i]) / std::log(hs[i + 1] / hs[i]));
  return r;
}

struct RateFit {
  double rate = 0.0;
  double constant = 0.0; // e ~ constant * h^rate
};

/// Least-squares line through (log h, log e).
inline RateFit fit_rate(const std::vector<double>& errors, const std::vector<double>& hs) {
  eoc(errors, hs); // validates
  const double n = static_cast<double>(errors.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double x = std::log(hs[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0)
    throw std::invalid_argument("fit_rate: mesh sizes must not all coincide");
  RateFit f;
  f.rate = (n * sxy - sx * sy) / den;
  f.constant = std::exp((sy - f.rate * sx) / n);
  return f;
}

struct EOCRow {
  int level = 0;
  double h = 0.0;
  std::size_t N = 0;
  ErrorNorms err;
  int iters = 0;
  std::string status;
  double multiplier = 0.0; // not part of the CSV
};

struct EOCTable {
  std::vector<EOCRow> rows;

  /// Rates between consecutive usable rows for one error column; empty when
  /// either row did not produce a solution.
  std::vector<std::optional<double>> rates(double ErrorNorms::*col) const {
    std::vector<std::optional<double>> r(rows.size());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& a = rows[i - 1];
      const auto& b = rows[i];
      if (usable(a) && usable(b) && a.err.*col > 0.0 && b.err.*col > 0.0)
        r[i] = std::log(b.err.*col / a.err.*col) / std::log(b.h / a.h);
    }
    return r;
  }

  static bool usable(const EOCRow& r) { return r.status == "converged" || r.status == "solved"; }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw std::invalid_argument("csv: bad number '" + s + "'");
  return v;
}

} // namespace detail

inline const char* eoc_csv_header() {
  return "level,h,N,l2,eoc_l2,h1,eoc_h1,recgrad,eoc_recgrad,hess,eoc_hess,iters,status";
}

/// Shortest round-trip decimal formatting; EOC cells are empty where undefined.
inline void write_csv(std::ostream& os, const EOCTable& t) {
  const std::array<double ErrorNorms::*, 4> cols{&ErrorNorms::l2, &ErrorNorms::h1, &ErrorNorms::recgrad,
                                                 &ErrorNorms::hess};
  std::array<std::vector<std::optional<double>>, 4> r;
  for (std::size_t c = 0; c < 4; ++c)
    r[c] = t.rates(cols[c]);
  os << eoc_csv_header() << '\n';
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    os << row.level << ',' << detail::fmt(row.h) << ',' << row.N;
    for (std::size_t c = 0; c < 4; ++c) {
      os << ',' << detail::fmt(row.err.*cols[c]) << ',';
      if (r[c][i])
        os << detail::fmt(*r[c][i]);
    }
    os << ',' << row.iters << ',' << row.status << '\n';
  }
}

inline EOCTable read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != eoc_csv_header())
    throw std::invalid_argument("csv: unexpected header");
  EOCTable t;
  while (std::getline(is, line)) {
    if (line.empty())
      continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      f.push_back(cell);
    if (!line.empty() && line.back() == ',')
      f.emplace_back();
    if (f.size() != 13)
      throw std::invalid_argument("csv: expected 13 fields, got " + std::to_string(f.size()));
    EOCRow r;
    r.level = std::stoi(f[0]);
    r.h = detail::parse_double(f[1]);
    r.N = static_cast<std::size_t>(std::stoull(f[2]));
    r.err.l2 = detail::parse_double(f[3]);
    r.err.h1 = detail::parse_double(f[5]);
    r.err.recgrad = detail::parse_double(f[7]);
    r.err.hess = detail::parse_double(f[9]);
    r.iters = std::stoi(f[11]);
    r.status = f[12];
    t.rows.push_back(r);
  }
  return t;
}

enum class BenchCase { disk_disk, disk_ellipse, oblique_linear };

inline BenchCase parse_case(const std::string& s) {
  if (s == "disk-disk") return BenchCase::disk_disk;
  if (s == "disk-ellipse") return BenchCase::disk_ellipse;
  if (s == "oblique-linear") return BenchCase::oblique_linear;
  throw std::invalid_argument("unknown case '" + s + "' (disk-disk, disk-ellipse, oblique-linear)");
}

/// Unit disk onto itself, rho = sigma = 1, u = |x|^2/2.
inline std::pair<ProblemData, ExactSolution> disk_disk_benchmark() {
  ProblemData d;
  ExactSolution e{[](const Point& x) { return 0.5 * x.squaredNorm(); }, [](const Point& x) -> Vec2 { return x; },
                  [](const Point&) -> Mat2 { return Mat2::Identity(); }};
  return {d, e};
}

/// Unit disk onto x^2/4 + y^2/9 <= 1, rho = 6, sigma = 1, u = x^2 + 3y^2/2 - 5/8.
inline std::pair<ProblemData, ExactSolution> disk_ellipse_benchmark() {
  ProblemData d;
  d.rho = [](const Point&) { return 6.0; };
  d.target = make_ellipse_target(2.0, 3.0);
  ExactSolution e{[](const Point& x) { return x.x() * x.x() + 1.5 * x.y() * x.y() - 0.625; },
                  [](const Point& x) -> Vec2 { return {2.0 * x.x(), 3.0 * x.y()}; },
                  [](const Point&) -> Mat2 { return Vec2(2.0, 3.0).asDiagonal(); }};
  return {d, e};
}

/// Laplace problem with Neumann data for u = cos(pi x) cos(pi y).
inline std::pair<LinearObliqueProblem, ExactSolution> oblique_benchmark() {
  using std::numbers::pi;
  ExactSolution e;
  e.u = [](const Point& x) { return std::cos(pi * x.x()) * std::cos(pi * x.y()); };
  e.grad = [](const Point& x) -> Vec2 {
    return {-pi * std::sin(pi * x.x()) * std::cos(pi * x.y()), -pi * std::cos(pi * x.x()) * std::sin(pi * x.y())};
  };
  e.hess = [](const Point& x) -> Mat2 {
    const double c = std::cos(pi * x.x()) * std::cos(pi * x.y());
    const double s = std::sin(pi * x.x()) * std::sin(pi * x.y());
    Mat2 m;
    m << -pi * pi * c, pi * pi * s, pi * pi * s, -pi * pi * c;
    return m;
  };
  LinearObliqueProblem p;
  p.r = [u = e.u](const Point& x) { return -2.0 * pi * pi * u(x); };
  p.s = [g = e.grad](const Point& x, const Vec2& n) { return n.dot(g(x)); };
  return {p, e};
}

struct BenchOptions {
  SolveOptions solve{};
  /// Called after each level; may be used for progress output.
  std::function<void(const EOCRow&)> on_row;
};

/// Solves the case on disk levels first..last and tabulates the errors.
inline EOCTable run_convergence(BenchCase c, int degree, GradientMode mode, int first, int last,
                                const BenchOptions& opt = {}) {
  if (first < 0 || last < first)
    throw std::invalid_argument("run_convergence: bad level range");
  EOCTable t;
  for (int level = first; level <= last; ++level) {
    FESpace space(triangulate_disk(static_cast<std::size_t>(level)), degree);
    RecoveryOperators ops(space);
    EOCRow row;
    row.level = level;
    row.h = meshsize(space.mesh());
    row.N = space.dim();
    if (c == BenchCase::oblique_linear) {
      auto [p, exact] = oblique_benchmark();
      try {
        ObliqueSolution s = solve_oblique(ops, p, {mode, opt.solve.solver});
        row.err = error_norms(space, s.u, s.gradient, s.hessian, exact);
        row.multiplier = s.multiplier;
        row.iters = 1;
        row.status = "solved";
      } catch (const SolverError&) {
        row.status = "failed";
        row.err = {NAN, NAN, NAN, NAN};
      }
    } else {
      auto [data, exact] = c == BenchCase::disk_disk ? disk_disk_benchmark() : disk_ellipse_benchmark();
      SolveOptions so = opt.solve;
      so.mode = mode;
      SolveResult r = solve_maot(ops, data, so);
      row.err = error_norms(space, r.state, exact);
      row.iters = r.state.iter;
      row.status = to_string(r.status);
      row.multiplier = r.state.c;
    }
    if (opt.on_row)
      opt.on_row(row);
    t.rows.push_back(row);
  }
  return t;
}

} // namespace maot
