#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "maot/image.hpp"

using namespace maot;

namespace {

std::string ascii_pgm(int w, int h, const std::vector<int>& px, int maxval = 255) {
  std::ostringstream os;
  os << "P2\n# test image\n" << w << ' ' << h << '\n' << maxval << '\n';
  for (int v : px)
    os << v << ' ';
  return os.str();
}

// P2 space with the interpolant of |x|^2/2: its gradient is the identity.
struct IdentityMap {
  FESpace space{triangulate_square(2), 2};
  RecoveryOperators ops{space};
  Vector u = interpolate(space, [](const Point& x) { return 0.5 * x.squaredNorm(); });
  RecoveredField g = ops.gradient(u);
};

} // namespace

TEST(Pgm, WhiteBlackCheckerboard) {
  std::istringstream white(ascii_pgm(2, 2, {255, 255, 255, 255}));
  PixelDensity w = to_density(parse_pgm(white), DensityMode::binary);
  for (double v : w.values)
    EXPECT_EQ(v, 2.0);
  std::istringstream black(ascii_pgm(2, 2, {0, 0, 0, 0}));
  PixelDensity b = to_density(parse_pgm(black), DensityMode::binary);
  for (double v : b.values)
    EXPECT_EQ(v, 1.0);
  std::istringstream checker(ascii_pgm(2, 2, {0, 255, 255, 0}));
  PixelDensity c = to_density(parse_pgm(checker), DensityMode::binary);
  EXPECT_EQ(c.values, (std::vector<double>{1.0, 2.0, 2.0, 1.0}));
  EXPECT_EQ(c.mean(), 1.5);
}

TEST(Pgm, BinaryAndWide) {
  std::string p5 = "P5\n3 1\n255\n";
  p5 += std::string{'\0', '\x80', '\xff'};
  std::istringstream is(p5);
  GrayImage img = parse_pgm(is);
  EXPECT_EQ(img.pixels, (std::vector<int>{0, 128, 255}));
  PixelDensity g = to_density(img, DensityMode::gray);
  EXPECT_NEAR(g.values[1], 1.0 + 128.0 / 255.0, 1e-15);
  EXPECT_EQ(to_density(img, DensityMode::binary).values, (std::vector<double>{1.0, 2.0, 2.0}));

  std::string wide = "P5 1 1 1000\n";
  wide += std::string{'\x01', '\xf4'};
  std::istringstream ws(wide);
  EXPECT_EQ(parse_pgm(ws).pixels[0], 500);
}

TEST(Pgm, RejectsMalformed) {
  std::istringstream magic("P3\n1 1\n255\n0");
  EXPECT_THROW(parse_pgm(magic), std::runtime_error);
  std::istringstream zero(ascii_pgm(0, 2, {}));
  EXPECT_THROW(parse_pgm(zero), std::runtime_error);
  std::istringstream truncated(ascii_pgm(2, 2, {1, 2, 3}));
  EXPECT_THROW(parse_pgm(truncated), std::runtime_error);
  std::istringstream over(ascii_pgm(1, 1, {300}));
  EXPECT_THROW(parse_pgm(over), std::runtime_error);
  std::istringstream no_header("P2\nabc");
  EXPECT_THROW(parse_pgm(no_header), std::runtime_error);
  EXPECT_THROW(load_bitmap("/nonexistent/file.pgm"), std::runtime_error);
}

TEST(Pgm, PixelLookupOrientation) {
  // top row black, bottom row white
  PixelDensity d{2, 2, {1.0, 1.0, 2.0, 2.0}};
  EXPECT_EQ(d(Point(-0.25, 0.25)), 1.0);
  EXPECT_EQ(d(Point(0.25, -0.25)), 2.0);
  EXPECT_EQ(d(Point(0.7, 0.7)), 1.0);   // clamped
  EXPECT_EQ(d(Point(-0.7, -0.7)), 2.0); // clamped
  PixelDensity lr{2, 1, {1.0, 2.0}};
  EXPECT_EQ(lr(Point(-0.1, 0.0)), 1.0);
  EXPECT_EQ(lr(Point(0.1, 0.0)), 2.0);
}

TEST(ImageProblem, DensitiesBalance) {
  PixelDensity d{2, 2, {1.0, 2.0, 2.0, 2.0}};
  ProblemData p = build_image_problem(d);
  EXPECT_EQ(p.sigma(Vec2::Zero()), 1.75);
  EXPECT_TRUE(p.mass_balanced_by_construction);
  FESpace V(triangulate_square(2), 1);
  // rho is constant on each mesh cell, so quadrature is exact
  EXPECT_NEAR(load_vector(V, [&](const QuadPoint& qp) { return p.rho(qp.x); }, Region::cells).sum(), 1.75, 1e-14);
  PixelDensity bad{2, 2, {1.0}};
  EXPECT_THROW(build_image_problem(bad), std::invalid_argument);
}

TEST(ImageProblem, WhiteImageIsIdentityWithP2) {
  std::istringstream white(ascii_pgm(4, 4, std::vector<int>(16, 255)));
  ProblemData p = build_image_problem(to_density(parse_pgm(white), DensityMode::binary));
  FESpace V(triangulate_square(4), 2);
  RecoveryOperators ops(V);
  SolveResult r = solve_maot(ops, p);
  ASSERT_TRUE(r.converged()) << r.message;
  GradientMap map(V, r.state.u, r.state.g, true);
  auto lines = deformed_grid(map, 5, 5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const Point h(-0.5 + 0.25 * j, -0.5 + 0.25 * i);
      EXPECT_LE((lines[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] - h).norm(), 1e-8);
      EXPECT_LE((lines[static_cast<std::size_t>(5 + i)][static_cast<std::size_t>(j)] - Point(h.y(), h.x())).norm(), 1e-8);
    }
  for (double y : {-0.5, -0.2, 0.0, 0.35, 0.5})
    for (double x : {-0.5, -0.1, 0.2, 0.5})
      EXPECT_LE((map(Point(x, y)) - Point(x, y)).norm(), 1e-8);
}

TEST(DeformedGrid, StructureUnderIdentity) {
  IdentityMap id;
  GradientMap map(id.space, id.u, id.g, true);
  auto lines = deformed_grid(map, 3, 4, 5);
  ASSERT_EQ(lines.size(), 7u);
  for (const auto& l : lines)
    EXPECT_EQ(l.size(), 5u);
  // horizontal lines first, bottom to top, boundary lines included
  EXPECT_LE((lines[0].front() - Point(-0.5, -0.5)).norm(), 1e-12);
  EXPECT_LE((lines[0].back() - Point(0.5, -0.5)).norm(), 1e-12);
  EXPECT_LE((lines[1][2] - Point(0.0, 0.0)).norm(), 1e-12);
  EXPECT_LE((lines[2].front() - Point(-0.5, 0.5)).norm(), 1e-12);
  // then vertical lines, left to right
  EXPECT_LE((lines[3].front() - Point(-0.5, -0.5)).norm(), 1e-12);
  EXPECT_LE((lines[4].back() - Point(-0.5 + 1.0 / 3.0, 0.5)).norm(), 1e-12);
  EXPECT_LE((lines[6].back() - Point(0.5, 0.5)).norm(), 1e-12);
  EXPECT_EQ(deformed_grid(map, 2, 2).front().size(), 17u);
  EXPECT_THROW(deformed_grid(map, 0, 2), std::invalid_argument);

  auto cells = deformed_cell_areas(map, 4);
  ASSERT_EQ(cells.size(), 16u);
  double total = 0.0;
  for (const auto& c : cells) {
    EXPECT_NEAR(c.area, 1.0 / 16.0, 1e-12);
    total += c.area;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_THROW(deformed_cell_areas(map, 0), std::invalid_argument);
}

TEST(DeformedGrid, PlainGradientAndOutsidePoints) {
  IdentityMap id;
  GradientMap plain(id.space, id.u, id.g, false);
  EXPECT_LE((plain(Point(0.1, -0.3)) - Point(0.1, -0.3)).norm(), 1e-12);
  EXPECT_THROW(plain(Point(0.8, 0.0)), DomainError);
}

TEST(Svg, RoundTrip) {
  std::vector<Polyline> lines{{Point(-0.5, -0.5), Point(0.1, 1.0 / 3.0), Point(0.5, 0.25)},
                              {Point(0.0, 0.0), Point(1e-17, -0.123456789012345)}};
  std::stringstream ss;
  render_svg(ss, lines);
  const std::string s = ss.str();
  EXPECT_NE(s.find("<svg"), std::string::npos);
  EXPECT_NE(s.find("viewBox=\"-0.55 -0.55 1.1 1.1\""), std::string::npos);
  EXPECT_NE(s.find("scale(1,-1)"), std::string::npos);
  ss.seekg(0);
  auto back = parse_svg_paths(ss);
  ASSERT_EQ(back.size(), lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ASSERT_EQ(back[i].size(), lines[i].size());
    for (std::size_t j = 0; j < lines[i].size(); ++j)
      EXPECT_EQ(back[i][j], lines[i][j]);
  }
  std::ostringstream os;
  EXPECT_THROW(render_svg(os, {}), std::invalid_argument);
  EXPECT_THROW(render_svg("/nonexistent/dir/out.svg", lines), std::runtime_error);
}
