// Command line front end: mesh, oblique, solve, bench and image subcommands.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "maot.hpp"

using namespace maot;
using json = nlohmann::json;

namespace {

GradientMode parse_mode(const std::string& s) {
  if (s == "recovered" || s == "on")
    return GradientMode::recovered;
  if (s == "plain" || s == "off")
    return GradientMode::plain;
  throw CLI::ValidationError("--recovery", "expected plain|recovered (or off|on)");
}

const std::vector<std::string> kRecovery{"plain", "recovered", "on", "off"};

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

Mesh make_mesh(const std::string& domain, int level, int n) {
  if (domain == "disk")
    return triangulate_disk(static_cast<std::size_t>(level));
  return triangulate_square(static_cast<std::size_t>(n));
}

// Scalar fields in problem.json: a number, {"constant": c}, or
// {"polynomial": [[c, i, j], ...]} meaning sum c x^i y^j.
struct Poly {
  std::vector<std::array<double, 3>> terms;

  double operator()(const Vec2& p) const {
    double s = 0.0;
    for (const auto& t : terms)
      s += t[0] * std::pow(p.x(), t[1]) * std::pow(p.y(), t[2]);
    return s;
  }

  Vec2 grad(const Vec2& p) const {
    Vec2 g = Vec2::Zero();
    for (const auto& t : terms) {
      if (t[1] > 0)
        g.x() += t[0] * t[1] * std::pow(p.x(), t[1] - 1) * std::pow(p.y(), t[2]);
      if (t[2] > 0)
        g.y() += t[0] * t[2] * std::pow(p.x(), t[1]) * std::pow(p.y(), t[2] - 1);
    }
    return g;
  }
};

Poly parse_field(const json& j, const char* name) {
  Poly p;
  if (j.is_number()) {
    p.terms.push_back({j.get<double>(), 0, 0});
  } else if (j.contains("constant")) {
    p.terms.push_back({j.at("constant").get<double>(), 0, 0});
  } else if (j.contains("polynomial")) {
    for (const auto& t : j.at("polynomial")) {
      if (t.size() != 3)
        throw std::runtime_error(std::string(name) + ": polynomial terms are [coefficient, i, j]");
      p.terms.push_back({t[0].get<double>(), t[1].get<double>(), t[2].get<double>()});
    }
  } else {
    throw std::runtime_error(std::string(name) + ": expected a number, constant or polynomial");
  }
  return p;
}

DefiningFunction parse_target(const json& j) {
  const std::string shape = j.at("shape");
  if (shape == "circle") {
    Point c = Point::Zero();
    if (j.contains("center"))
      c = {j["center"][0].get<double>(), j["center"][1].get<double>()};
    return make_circle_target(j.value("radius", 1.0), c);
  }
  if (shape == "ellipse")
    return make_ellipse_target(j.at("a").get<double>(), j.at("b").get<double>());
  if (shape == "box")
    return make_box_target(j.value("side", 1.0));
  throw std::runtime_error("target: unknown shape '" + shape + "' (circle, ellipse, box)");
}

ProblemData load_problem(const std::string& path) {
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("cannot open " + path);
  const json j = json::parse(is);
  ProblemData d;
  if (j.contains("rho")) {
    Poly rho = parse_field(j["rho"], "rho");
    d.rho = [rho](const Point& x) { return rho(x); };
  }
  if (j.contains("sigma")) {
    Poly sigma = parse_field(j["sigma"], "sigma");
    d.sigma = [sigma](const Vec2& p) { return sigma(p); };
    d.grad_sigma = [sigma](const Vec2& p) { return sigma.grad(p); };
  }
  if (j.contains("target"))
    d.target = parse_target(j["target"]);
  return d;
}

void write_state(std::ostream& os, const FESpace& space, const SolveResult& r) {
  char buf[64];
  auto num = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  const auto& st = r.state;
  os << "status " << to_string(r.status) << '\n'
     << "iterations " << st.iter << '\n'
     << "residual " << num(st.residual) << '\n'
     << "multiplier " << num(st.c) << '\n'
     << "degree " << space.degree() << '\n'
     << "dofs " << space.dim() << '\n'
     << "# x y u g1 g2 h11 h12 h22\n";
  for (std::size_t i = 0; i < space.dim(); ++i) {
    const auto k = to_eigen(i);
    const Point& x = space.dof_coords()[i];
    os << num(x.x()) << ' ' << num(x.y()) << ' ' << num(st.u(k));
    for (const auto& c : st.g.components)
      os << ' ' << num(c(k));
    for (const auto& c : st.H.components)
      os << ' ' << num(c(k));
    os << '\n';
  }
}

void print_row(const EOCRow& r) {
  std::fprintf(stderr, "level %d  N %zu  h %.4g  L2 %.4e  H1 %.4e  iters %d  %s\n", r.level, r.N, r.h, r.err.l2,
               r.err.h1, r.iters, r.status.c_str());
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonvariational finite element solver for Monge-Ampere optimal transport"};
  app.require_subcommand(1);

  // mesh
  auto* mesh_cmd = app.add_subcommand("mesh", "Write a structured mesh");
  std::string mesh_domain = "disk", mesh_out = "mesh.txt";
  int mesh_level = 2, mesh_n = 8;
  mesh_cmd->add_option("--domain", mesh_domain)->check(CLI::IsMember({"disk", "square"}));
  mesh_cmd->add_option("--level", mesh_level, "refinement level of the disk")->check(CLI::NonNegativeNumber);
  mesh_cmd->add_option("--n", mesh_n, "squares per side of the square mesh")->check(CLI::PositiveNumber);
  mesh_cmd->add_option("--out", mesh_out);

  // oblique
  auto* obl_cmd = app.add_subcommand("oblique", "EOC table for the linear oblique solver");
  std::string obl_case = "oblique-linear", obl_rec = "on", obl_out = "eoc.csv";
  int obl_degree = 1, obl_levels = 4, obl_first = 1;
  obl_cmd->add_option("--case", obl_case)->check(CLI::IsMember({"oblique-linear"}));
  obl_cmd->add_option("--degree", obl_degree)->check(CLI::Range(1, 3));
  obl_cmd->add_option("--levels", obl_levels, "finest disk level")->check(CLI::PositiveNumber);
  obl_cmd->add_option("--first", obl_first, "coarsest disk level")->check(CLI::NonNegativeNumber);
  obl_cmd->add_option("--recovery", obl_rec)->check(CLI::IsMember(kRecovery));
  obl_cmd->add_option("--out", obl_out);

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Solve one Monge-Ampere transport problem");
  std::string sv_case = "disk-disk", sv_config, sv_rec = "recovered", sv_damp = "on", sv_out = "state.txt",
              sv_domain = "disk";
  int sv_degree = 1, sv_level = 3, sv_n = 8, sv_itermax = 50;
  double sv_tol = 1e-8;
  solve_cmd->add_option("--case", sv_case)->check(CLI::IsMember({"disk-disk", "disk-ellipse", "custom"}));
  solve_cmd->add_option("--config", sv_config, "problem.json for --case custom")->check(CLI::ExistingFile);
  solve_cmd->add_option("--degree", sv_degree)->check(CLI::Range(1, 3));
  solve_cmd->add_option("--level", sv_level)->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--domain", sv_domain, "source domain for --case custom")
      ->check(CLI::IsMember({"disk", "square"}));
  solve_cmd->add_option("--n", sv_n, "squares per side for --domain square")->check(CLI::PositiveNumber);
  solve_cmd->add_option("--recovery", sv_rec)->check(CLI::IsMember(kRecovery));
  solve_cmd->add_option("--tol", sv_tol)->check(CLI::PositiveNumber);
  solve_cmd->add_option("--itermax", sv_itermax)->check(CLI::NonNegativeNumber);
  solve_cmd->add_option("--damping", sv_damp)->check(CLI::IsMember({"on", "off"}));
  solve_cmd->add_option("--out", sv_out);

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Convergence study on the disk benchmarks");
  std::string bn_case = "disk-disk", bn_rec = "recovered", bn_out = "eoc.csv";
  int bn_degree = 1, bn_levels = 4, bn_first = 1, bn_itermax = 50;
  bench_cmd->add_option("--case", bn_case)->check(CLI::IsMember({"disk-disk", "disk-ellipse", "oblique-linear"}));
  bench_cmd->add_option("--degree", bn_degree)->check(CLI::Range(1, 3));
  bench_cmd->add_option("--recovery", bn_rec)->check(CLI::IsMember(kRecovery));
  bench_cmd->add_option("--levels", bn_levels, "finest disk level")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--first", bn_first, "coarsest disk level")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--itermax", bn_itermax)->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--out", bn_out);

  // image
  auto* img_cmd = app.add_subcommand("image", "Deform a uniform grid by the transport map of an image density");
  std::string im_input, im_mode = "binary", im_grid = "32x32", im_rec = "recovered", im_out = "grid.svg";
  int im_degree = 1, im_itermax = 50;
  img_cmd->add_option("--input", im_input, "PGM image (P2 or P5)")->required()->check(CLI::ExistingFile);
  img_cmd->add_option("--mode", im_mode)->check(CLI::IsMember({"binary", "gray"}));
  img_cmd->add_option("--grid", im_grid, "grid lines as MxN");
  img_cmd->add_option("--degree", im_degree)->check(CLI::Range(1, 3));
  img_cmd->add_option("--recovery", im_rec)->check(CLI::IsMember(kRecovery));
  img_cmd->add_option("--itermax", im_itermax)->check(CLI::NonNegativeNumber);
  img_cmd->add_option("--out", im_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*mesh_cmd) {
      Mesh m = make_mesh(mesh_domain, mesh_level, mesh_n);
      write_mesh(mesh_out, m);
      std::cerr << m.num_vertices() << " vertices, " << m.num_cells() << " cells, h = " << meshsize(m) << '\n';
    } else if (*obl_cmd) {
      BenchOptions bo;
      bo.on_row = print_row;
      EOCTable t = run_convergence(BenchCase::oblique_linear, obl_degree, parse_mode(obl_rec), obl_first, obl_levels, bo);
      auto os = open_out(obl_out);
      write_csv(os, t);
      for (const auto& r : t.rows)
        std::cerr << "level " << r.level << " multiplier " << r.multiplier << '\n';
    } else if (*solve_cmd) {
      ProblemData data;
      Mesh mesh = triangulate_disk(static_cast<std::size_t>(sv_level));
      if (sv_case == "disk-ellipse") {
        data = disk_ellipse_benchmark().first;
      } else if (sv_case == "custom") {
        if (sv_config.empty())
          throw std::runtime_error("--case custom needs --config problem.json");
        data = load_problem(sv_config);
        mesh = make_mesh(sv_domain, sv_level, sv_n);
      }
      FESpace space(mesh, sv_degree);
      SolveOptions so;
      so.tol = sv_tol;
      so.itermax = sv_itermax;
      so.damping = sv_damp == "on";
      so.mode = parse_mode(sv_rec);
      SolveResult r = solve_maot(RecoveryOperators(space), data, so);
      for (std::size_t i = 0; i < r.history.size(); ++i)
        std::cerr << "iter " << i << "  residual " << r.history[i] << '\n';
      std::cerr << to_string(r.status) << (r.message.empty() ? "" : ": " + r.message) << '\n';
      if (r.convexity_warnings)
        std::cerr << "warning: " << r.convexity_warnings << " iterates failed the nodal convexity check\n";
      if (r.obliqueness_warnings)
        std::cerr << "warning: " << r.obliqueness_warnings << " steps lost obliqueness somewhere on the boundary\n";
      auto os = open_out(sv_out);
      write_state(os, space, r);
      return r.converged() ? 0 : 2;
    } else if (*bench_cmd) {
      BenchOptions bo;
      bo.solve.itermax = bn_itermax;
      bo.on_row = print_row;
      EOCTable t = run_convergence(parse_case(bn_case), bn_degree, parse_mode(bn_rec), bn_first, bn_levels, bo);
      auto os = open_out(bn_out);
      write_csv(os, t);
      std::vector<double> e, h;
      for (const auto& r : t.rows)
        if (EOCTable::usable(r)) {
          e.push_back(r.err.l2);
          h.push_back(r.h);
        }
      if (e.size() >= 2) {
        RateFit f = fit_rate(e, h);
        std::cerr << "least-squares L2 fit: e = " << f.constant << " h^" << f.rate << '\n';
      }
    } else if (*img_cmd) {
      int gm = 0, gn = 0;
      if (std::sscanf(im_grid.c_str(), "%dx%d", &gm, &gn) != 2 || gm <= 0 || gn <= 0)
        throw CLI::ValidationError("--grid", "expected MxN with positive M and N");
      PixelDensity d = load_bitmap(im_input, im_mode == "gray" ? DensityMode::gray : DensityMode::binary);
      FESpace space(triangulate_square(static_cast<std::size_t>(std::max(d.width, d.height))), im_degree);
      SolveOptions so;
      so.itermax = im_itermax;
      so.mode = parse_mode(im_rec);
      SolveResult r = solve_maot(RecoveryOperators(space), build_image_problem(d), so);
      std::cerr << to_string(r.status) << " after " << r.state.iter << " iterations, residual " << r.state.residual
                << '\n';
      render_svg(im_out, deformed_grid(space, r.state, gm, gn, so.mode == GradientMode::recovered));
      return r.converged() ? 0 : 2;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
