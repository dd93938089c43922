// Acceptance run: one PASS/FAIL line per criterion. Criteria can be selected
// on the command line (e.g. `acceptance 1 4 7`); all run by default.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "maot.hpp"

using namespace maot;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void print_table(const char* name, const EOCTable& t) {
  auto l2 = t.rates(&ErrorNorms::l2), h1 = t.rates(&ErrorNorms::h1);
  std::printf("  %s\n  level        h      N         l2  eoc_l2         h1  eoc_h1    recgrad  iters  status\n", name);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    std::printf("  %5d  %.5f  %5zu  %.3e  %6s  %.3e  %6s  %.3e  %5d  %s\n", r.level, r.h, r.N, r.err.l2,
                l2[i] ? fmt("%.3f", *l2[i]).c_str() : "", r.err.h1, h1[i] ? fmt("%.3f", *h1[i]).c_str() : "",
                r.err.recgrad, r.iters, r.status.c_str());
  }
  std::fflush(stdout);
}

// Rate between the two finest rows that both produced a solution.
std::optional<std::pair<double, int>> finest_usable_rate(const EOCTable& t, double ErrorNorms::*col) {
  auto r = t.rates(col);
  for (std::size_t i = r.size(); i-- > 1;)
    if (r[i])
      return std::make_pair(*r[i], t.rows[i].level);
  return std::nullopt;
}

BenchOptions progress(SolveOptions so = {}) {
  BenchOptions o;
  o.solve = so;
  o.on_row = [](const EOCRow& r) {
    std::printf("    level %d: %s, %d iterations\n", r.level, r.status.c_str(), r.iters);
    std::fflush(stdout);
  };
  return o;
}

// Disk-to-disk, P1 with recovery, levels 1..4; shared by criteria 1 and 4.
const EOCTable& criterion1_table() {
  static const EOCTable t = [] {
    std::printf("  running disk-disk, k=1, recovered, levels 1..4\n");
    return run_convergence(BenchCase::disk_disk, 1, GradientMode::recovered, 1, 4, progress());
  }();
  return t;
}

Verdict criterion1() {
  const EOCTable& t = criterion1_table();
  print_table("disk-disk k=1 recovered", t);
  for (const auto& r : t.rows)
    if (r.status != "converged")
      return {false, "level " + std::to_string(r.level) + " " + r.status};
  const double l2 = *t.rates(&ErrorNorms::l2).back();
  const double h1 = *t.rates(&ErrorNorms::h1).back();
  const bool ok = l2 >= 1.8 && l2 <= 2.4 && h1 >= 0.8 && h1 <= 1.4;
  return {ok, "finest-pair L2 EOC " + fmt("%.3f", l2) + " in [1.8,2.4], H1 EOC " + fmt("%.3f", h1) + " in [0.8,1.4]"};
}

Verdict criterion2() {
  SolveOptions so;
  so.itermax = 20;
  std::printf("  running disk-disk, k=2, plain, levels 1..4 (itermax %d)\n", so.itermax);
  EOCTable t = run_convergence(BenchCase::disk_disk, 2, GradientMode::plain, 1, 4, progress(so));
  print_table("disk-disk k=2 plain", t);
  auto r = finest_usable_rate(t, &ErrorNorms::l2);
  if (!r)
    return {false, "no pair of converged levels"};
  return {r->first <= 2.5, "finest converged pair (levels " + std::to_string(r->second - 1) + "-" +
                                std::to_string(r->second) + ") L2 EOC " + fmt("%.3f", r->first) + " <= 2.5"};
}

Verdict criterion3() {
  std::printf("  running disk-disk, k=1, plain, levels 2..5 (itermax 50)\n");
  EOCTable t = run_convergence(BenchCase::disk_disk, 1, GradientMode::plain, 2, 5, progress());
  print_table("disk-disk k=1 plain", t);
  std::string failed;
  for (const auto& r : t.rows)
    if (r.status != "converged")
      failed += (failed.empty() ? "" : ", ") + std::to_string(r.level) + " (" + r.status + ")";
  if (failed.empty())
    return {false, "all levels converged"};
  return {true, "non-convergence on level " + failed};
}

Verdict criterion4() {
  const EOCTable& t = criterion1_table();
  bool ok = true;
  std::string d;
  for (const auto& r : t.rows) {
    ok = ok && r.err.recgrad <= r.err.h1;
    d += (d.empty() ? "" : "; ") + std::string("L") + std::to_string(r.level) + " " + fmt("%.3e", r.err.recgrad) +
         " vs " + fmt("%.3e", r.err.h1);
  }
  return {ok, "|grad u - G U| vs |grad u - grad U|: " + d};
}

Verdict criterion5() {
  SolveOptions so;
  so.itermax = 25;
  std::printf("  running disk-ellipse, k=1, recovered, levels 1..3 (itermax %d)\n", so.itermax);
  EOCTable t = run_convergence(BenchCase::disk_ellipse, 1, GradientMode::recovered, 1, 3, progress(so));
  print_table("disk-ellipse k=1 recovered", t);
  for (const auto& r : t.rows)
    if (r.status != "converged")
      return {false, "level " + std::to_string(r.level) + " did not converge within 25 iterations (" + r.status + ")"};
  const double l2 = *t.rates(&ErrorNorms::l2).back();
  return {l2 >= 1.7, "finest-pair L2 EOC " + fmt("%.3f", l2) + " >= 1.7"};
}

Verdict criterion6() {
  std::vector<std::string> bad;
  double worst_ibp = 0.0, worst_hess = 0.0, worst_mean = 0.0, worst_jacobi = 0.0;

  for (int k = 1; k <= 3; ++k) {
    FESpace V(triangulate_disk(3), k);
    for (int a = 0; a < 2; ++a) {
      SparseMatrix A = derivative_matrix(V, a);
      SparseMatrix D = SparseMatrix(A + SparseMatrix(A.transpose())) - boundary_matrix(V, a);
      worst_ibp = std::max(worst_ibp, Eigen::MatrixXd(D).cwiseAbs().maxCoeff());
    }
  }
  if (!(worst_ibp <= 1e-10))
    bad.push_back("integration by parts " + fmt("%.2e", worst_ibp));

  {
    FESpace V(triangulate_disk(3), 2);
    RecoveryOperators ops(V);
    Vector u = interpolate(V, [](const Point& x) { return 2.0 * x.x() * x.x() - x.x() * x.y() + 0.5 * x.y() * x.y() + x.y(); });
    Mat2 H;
    H << 4.0, -1.0, -1.0, 1.0;
    for (const RecoveredField& F : {ops.hessian(u), ops.hessian_recovered(ops.gradient(u))})
      for (std::size_t i = 0; i < V.dim(); ++i)
        worst_hess = std::max(worst_hess, (F.matrix_at(i) - H).cwiseAbs().maxCoeff());
  }
  if (!(worst_hess <= 1e-8))
    bad.push_back("quadratic Hessians " + fmt("%.2e", worst_hess));

  bool cof_ok = true;
  std::size_t spd_nodes = 0;
  auto newton_run = [&](BenchCase c, int degree, GradientMode mode, int level) {
    auto [data, exact] = c == BenchCase::disk_disk ? disk_disk_benchmark() : disk_ellipse_benchmark();
    FESpace V(triangulate_disk(static_cast<std::size_t>(level)), degree);
    RecoveryOperators ops(V);
    NewtonState st = initial_state(ops, mode);
    st.residual = residual_norm(ops, st, data, mode);
    for (int it = 0; it < 8 && st.residual > 1e-8; ++it) {
      st = newton_step(ops, st, data, {mode});
      worst_mean = std::max(worst_mean, std::abs(ops.total_mass.dot(st.u)));
      for (std::size_t i = 0; i < V.dim(); ++i) {
        const Mat2 Hn = st.H.matrix_at(i);
        if (Hn(0, 0) > 0.0 && Hn.determinant() > 0.0) {
          ++spd_nodes;
          const Mat2 C = cofactor(Hn);
          Eigen::SelfAdjointEigenSolver<Mat2> es(0.5 * (C + C.transpose()));
          cof_ok = cof_ok && es.eigenvalues().minCoeff() > 0.0;
        }
      }
    }
  };
  newton_run(BenchCase::disk_ellipse, 1, GradientMode::recovered, 2);
  newton_run(BenchCase::disk_disk, 2, GradientMode::plain, 2);
  newton_run(BenchCase::disk_ellipse, 2, GradientMode::recovered, 1);
  if (!(worst_mean <= 1e-8))
    bad.push_back("zero mean " + fmt("%.2e", worst_mean));
  if (!cof_ok)
    bad.push_back("cofactor of a convex node not SPD");

  std::mt19937 rng(2024);
  std::normal_distribution<double> g;
  const double t = 1e-5;
  for (int k = 0; k < 1000; ++k) {
    Mat2 M, D;
    M << g(rng), g(rng), g(rng), g(rng);
    D << g(rng), g(rng), g(rng), g(rng);
    D /= D.norm();
    const double fd = ((M + t * D).determinant() - M.determinant()) / t;
    worst_jacobi = std::max(worst_jacobi, std::abs(fd - frobenius(cofactor(M), D)));
  }
  if (!(worst_jacobi <= 10.0 * t))
    bad.push_back("Jacobi formula " + fmt("%.2e", worst_jacobi));

  std::ostringstream os;
  os << "A+A^T-N " << fmt("%.1e", worst_ibp) << ", quadratic Hessian " << fmt("%.1e", worst_hess) << ", max |d.u| "
     << fmt("%.1e", worst_mean) << ", Jacobi " << fmt("%.1e", worst_jacobi) << ", " << spd_nodes
     << " convex nodes with SPD cofactor";
  for (const auto& b : bad)
    os << "; FAILED " << b;
  return {bad.empty(), os.str()};
}

Verdict criterion7() {
  std::printf("  running oblique-linear, k=1, recovered, levels 2..5\n");
  EOCTable t = run_convergence(BenchCase::oblique_linear, 1, GradientMode::recovered, 2, 5, progress());
  print_table("oblique-linear k=1 recovered", t);
  double min_eoc = INFINITY;
  for (const auto& r : t.rates(&ErrorNorms::l2))
    if (r)
      min_eoc = std::min(min_eoc, *r);
  bool ok = std::isfinite(min_eoc) && min_eoc >= 1.8;
  for (const auto& r : t.rows)
    ok = ok && r.status == "solved";

  // Data read off a discrete triple (U, G U, H G U): the exact discrete
  // solution has zero multiplier.
  FESpace V(triangulate_disk(3), 1);
  RecoveryOperators ops(V);
  Vector u = interpolate(V, [](const Point& x) { return std::exp(x.x()) * std::sin(2.0 * x.y()); });
  u.array() -= ops.total_mass.dot(u) / ops.total_mass.sum();
  RecoveredField G = ops.gradient(u);
  RecoveredField H = ops.hessian_recovered(G);
  PointLocator loc(V.mesh(), 1e-9);
  LinearObliqueProblem p;
  p.r = [&](const Point& x) {
    auto [c, l] = *loc.locate(x);
    return H.matrix_at(eval_basis(V, c, l).values, V.cell_dofs(c)).trace();
  };
  p.s = [&](const Point& x, const Vec2& n) {
    auto [c, l] = *loc.locate(x);
    return n.dot(G.vector_at(eval_basis(V, c, l).values, V.cell_dofs(c)));
  };
  ObliqueSolution s = solve_oblique(ops, p);
  ok = ok && std::abs(s.multiplier) <= 1e-6;
  return {ok, "min L2 EOC " + fmt("%.3f", min_eoc) + " >= 1.8, compatible-data |c_mult| " +
                  fmt("%.2e", std::abs(s.multiplier)) + " <= 1e-6"};
}

struct ImageRun {
  SolveResult result;
  double sup = 0.0;
  double black = 0.0, white = 0.0;
};

ImageRun image_run(bool all_white) {
  const int n = 8;
  PixelDensity d{n, n, {}};
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      d.values.push_back(all_white || c >= n / 2 ? 2.0 : 1.0);
  FESpace V(triangulate_square(n), 1);
  RecoveryOperators ops(V);
  ImageRun out;
  out.result = solve_maot(ops, build_image_problem(d));
  GradientMap map(V, out.result.state.u, out.result.state.g, true);
  const int lines = n + 1;
  auto grid = deformed_grid(map, lines, lines);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& l = grid[i];
    const bool horizontal = i < static_cast<std::size_t>(lines);
    const double pos = -0.5 + static_cast<double>(horizontal ? i : i - lines) / (lines - 1);
    for (std::size_t j = 0; j < l.size(); ++j) {
      const double along = -0.5 + static_cast<double>(j) / static_cast<double>(l.size() - 1);
      const Point x = horizontal ? Point(along, pos) : Point(pos, along);
      out.sup = std::max(out.sup, (l[j] - x).norm());
    }
  }
  int nb = 0, nw = 0;
  for (const auto& c : deformed_cell_areas(map, n)) {
    if (d(c.center) < 1.5) {
      out.black += c.area;
      ++nb;
    } else {
      out.white += c.area;
      ++nw;
    }
  }
  out.black = nb ? out.black / nb : 0.0;
  out.white = nw ? out.white / nw : 0.0;
  return out;
}

Verdict criterion8() {
  ImageRun half = image_run(false);
  ImageRun white = image_run(true);
  const bool conv = half.result.converged();
  const bool areas = half.black < half.white;
  const bool ident = white.result.converged() && white.sup <= 0.02;
  std::ostringstream os;
  os << "half/half " << to_string(half.result.status) << " in " << half.result.state.iter << " iterations; mean cell area black "
     << fmt("%.5f", half.black) << " < white " << fmt("%.5f", half.white) << (areas ? "" : " FAILED")
     << "; all-white " << to_string(white.result.status) << ", sup distance to uniform grid " << fmt("%.4f", white.sup)
     << " <= 0.02" << (ident ? "" : " FAILED");
  return {conv && areas && ident, os.str()};
}

} // namespace

int main(int argc, char** argv) {
  const std::function<Verdict()> criteria[] = {criterion1, criterion2, criterion3, criterion4,
                                               criterion5, criterion6, criterion7, criterion8};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    int c = std::atoi(argv[i]);
    if (c < 1 || c > 8) {
      std::fprintf(stderr, "usage: %s [criterion 1-8 ...]\n", argv[0]);
      return 2;
    }
    selected.insert(c);
  }
  if (selected.empty())
    for (int c = 1; c <= 8; ++c)
      selected.insert(c);

  std::vector<std::string> summary;
  int failures = 0;
  for (int c : selected) {
    std::printf("criterion %d\n", c);
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[c - 1]();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream line;
    line << "CRITERION " << c << ": " << (v.pass ? "PASS" : "FAIL") << " (" << fmt("%.1f", secs) << " s) " << v.detail;
    std::printf("%s\n\n", line.str().c_str());
    std::fflush(stdout);
    summary.push_back(line.str());
    failures += !v.pass;
  }
  std::printf("summary\n");
  for (const auto& s : summary)
    std::printf("%s\n", s.c_str());
  return failures == 0 ? 0 : 1;
}
