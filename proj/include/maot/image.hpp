#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "maot/bench.hpp"

namespace maot {

/// Pixel values over (-1/2,1/2)^2, stored row-major with the top row first.
struct PixelDensity {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)];
  }

  /// Value of the pixel containing x; points outside are clamped to the edge.
  double operator()(const Point& x) const {
    const int col = std::clamp(static_cast<int>(std::floor((x.x() + 0.5) * width)), 0, width - 1);
    const int row = std::clamp(static_cast<int>(std::floor((0.5 - x.y()) * height)), 0, height - 1);
    return at(row, col);
  }

  double mean() const {
    double s = 0.0;
    for (double v : values)
      s += v;
    return s / static_cast<double>(values.size());
  }
};

struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<int> pixels; // row-major, top row first
};

namespace detail {

inline void skip_pgm_space(std::istream& is) {
  while (true) {
    int c = is.peek();
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (c != EOF && std::isspace(c)) {
      is.get();
    } else {
      return;
    }
  }
}

inline int read_pgm_int(std::istream& is, const char* what) {
  skip_pgm_space(is);
  int v = 0;
  if (!(is >> v))
    throw std::runtime_error(std::string("pgm: malformed header, cannot read ") + what);
  return v;
}

} // namespace detail

/// Binary (P5) or ASCII (P2) PGM.
inline GrayImage parse_pgm(std::istream& is) {
  char magic[2] = {0, 0};
  if (!is.read(magic, 2) || magic[0] != 'P' || (magic[1] != '2' && magic[1] != '5'))
    throw std::runtime_error("pgm: malformed header, expected P2 or P5");
  GrayImage img;
  img.width = detail::read_pgm_int(is, "width");
  img.height = detail::read_pgm_int(is, "height");
  img.maxval = detail::read_pgm_int(is, "maxval");
  if (img.width <= 0 || img.height <= 0)
    throw std::runtime_error("pgm: dimensions must be positive");
  if (img.maxval <= 0 || img.maxval > 65535)
    throw std::runtime_error("pgm: maxval out of range");
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.pixels.resize(n);
  if (magic[1] == '2') {
    for (auto& p : img.pixels)
      if (!(is >> p))
        throw std::runtime_error("pgm: truncated pixel data");
  } else {
    is.get(); // the single whitespace byte after maxval
    const bool wide = img.maxval > 255;
    for (auto& p : img.pixels) {
      unsigned char b[2];
      if (!is.read(reinterpret_cast<char*>(b), wide ? 2 : 1))
        throw std::runtime_error("pgm: truncated pixel data");
      p = wide ? (b[0] << 8) | b[1] : b[0];
    }
  }
  for (auto& p : img.pixels)
    if (p < 0 || p > img.maxval)
      throw std::runtime_error("pgm: pixel value exceeds maxval");
  return img;
}

enum class DensityMode { binary, gray };

/// Binary: 2 on white (at least mid-gray), 1 on black. Gray: 1 + v/maxval.
inline PixelDensity to_density(const GrayImage& img, DensityMode mode) {
  PixelDensity d{img.width, img.height, {}};
  d.values.reserve(img.pixels.size());
  for (int p : img.pixels) {
    const double v = static_cast<double>(p) / img.maxval;
    d.values.push_back(mode == DensityMode::binary ? (v >= 0.5 ? 2.0 : 1.0) : 1.0 + v);
  }
  return d;
}

inline PixelDensity load_bitmap(const std::string& path, DensityMode mode = DensityMode::binary) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw std::runtime_error("load_bitmap: cannot open " + path);
  return to_density(parse_pgm(is), mode);
}

/// Piecewise rho from the pixels, sigma its mean, unit square target.
inline ProblemData build_image_problem(const PixelDensity& density) {
  if (density.width <= 0 || density.height <= 0 ||
      density.values.size() != static_cast<std::size_t>(density.width) * static_cast<std::size_t>(density.height))
    throw std::invalid_argument("build_image_problem: inconsistent density");
  ProblemData d;
  d.rho = [density](const Point& x) { return density(x); };
  const double s = density.mean();
  d.sigma = [s](const Vec2&) { return s; };
  d.target = make_box_target(1.0);
  d.mass_balanced_by_construction = true;
  return d;
}

using Polyline = std::vector<Point>;

/// Evaluates the recovered gradient or the broken gradient of U at points.
class GradientMap {
public:
  GradientMap(const FESpace& space, const Vector& u, const RecoveredField& g, bool use_recovered)
      : space_(&space), u_(&u), g_(&g), rec_(use_recovered), loc_(space.mesh(), 1e-9) {}

  Point operator()(const Point& x) const {
    auto hit = loc_.locate(x);
    if (!hit) {
      std::ostringstream os;
      os << "deformed_grid: sample point (" << x.x() << ", " << x.y() << ") outside the mesh";
      throw DomainError(os.str());
    }
    const auto [c, bary] = *hit;
    const BasisValues b = eval_basis(*space_, c, bary);
    const auto dofs = space_->cell_dofs(c);
    return rec_ ? g_->vector_at(b.values, dofs) : gradient_at(*u_, b, dofs);
  }

private:
  const FESpace* space_;
  const Vector* u_;
  const RecoveredField* g_;
  bool rec_;
  PointLocator loc_;
};

/// Images of a uniform grid of (-1/2,1/2)^2 with `rows` horizontal and
/// `cols` vertical lines (boundary lines included when there are two or
/// more), each sampled at `samples` points. Horizontal lines come first,
/// bottom to top, then vertical lines left to right.
inline std::vector<Polyline> deformed_grid(const GradientMap& map, int rows, int cols, int samples = 0) {
  if (rows <= 0 || cols <= 0)
    throw std::invalid_argument("deformed_grid: grid dimensions must be positive");
  if (samples <= 0)
    samples = 8 * std::max(rows, cols) + 1;
  if (samples < 2)
    samples = 2;
  auto line_pos = [](int i, int n) { return n == 1 ? 0.0 : -0.5 + static_cast<double>(i) / (n - 1); };
  auto along = [samples](int j) { return -0.5 + static_cast<double>(j) / (samples - 1); };
  std::vector<Polyline> out;
  for (int i = 0; i < rows; ++i) {
    Polyline p;
    for (int j = 0; j < samples; ++j)
      p.push_back(map(Point(along(j), line_pos(i, rows))));
    out.push_back(std::move(p));
  }
  for (int i = 0; i < cols; ++i) {
    Polyline p;
    for (int j = 0; j < samples; ++j)
      p.push_back(map(Point(line_pos(i, cols), along(j))));
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<Polyline> deformed_grid(const FESpace& space, const NewtonState& st, int rows, int cols,
                                           bool use_recovered, int samples = 0) {
  return deformed_grid(GradientMap(space, st.u, st.g, use_recovered), rows, cols, samples);
}

struct GridCell {
  Point center; // undeformed
  double area;  // of the mapped quadrilateral
};

/// Areas of the images of the n x n uniform cells of the unit square, with
/// corners mapped pointwise.
inline std::vector<GridCell> deformed_cell_areas(const GradientMap& map, int n) {
  if (n <= 0)
    throw std::invalid_argument("deformed_cell_areas: n must be positive");
  std::vector<Point> img;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      img.push_back(map(Point(-0.5 + static_cast<double>(i) / n, -0.5 + static_cast<double>(j) / n)));
  auto at = [&](int i, int j) { return img[static_cast<std::size_t>(j * (n + 1) + i)]; };
  std::vector<GridCell> out;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const Point q[4] = {at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
      double a = 0.0;
      for (int k = 0; k < 4; ++k)
        a += q[k].x() * q[(k + 1) % 4].y() - q[(k + 1) % 4].x() * q[k].y();
      out.push_back({Point(-0.5 + (i + 0.5) / n, -0.5 + (j + 0.5) / n), 0.5 * a});
    }
  return out;
}

/// SVG 1.1 with one path per polyline, y pointing up, viewport covering the
/// unit square plus a 5% margin.
inline void render_svg(std::ostream& os, const std::vector<Polyline>& lines) {
  if (lines.empty())
    throw std::invalid_argument("render_svg: no polylines");
  const double side = 1.1;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"800\" height=\"800\" viewBox=\"-0.55 -0.55 "
     << side << ' ' << side << "\">\n"
     << "<g transform=\"scale(1,-1)\" fill=\"none\" stroke=\"black\" stroke-width=\"" << 0.005 * side << "\">\n";
  for (const auto& l : lines) {
    os << "<path d=\"";
    for (std::size_t i = 0; i < l.size(); ++i)
      os << (i == 0 ? "M" : " L") << detail::fmt(l[i].x()) << ' ' << detail::fmt(l[i].y());
    os << "\"/>\n";
  }
  os << "</g>\n</svg>\n";
  if (!os)
    throw std::runtime_error("render_svg: write failed");
}

inline void render_svg(const std::string& path, const std::vector<Polyline>& lines) {
  if (lines.empty())
    throw std::invalid_argument("render_svg: no polylines");
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("render_svg: cannot open " + path);
  render_svg(os, lines);
}

/// Reads back the path coordinates written by render_svg.
inline std::vector<Polyline> parse_svg_paths(std::istream& is) {
  const std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  std::vector<Polyline> out;
  const std::string key = "<path d=\"";
  for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos)) {
    pos += key.size();
    const auto end = text.find('"', pos);
    std::istringstream d(text.substr(pos, end - pos));
    Polyline p;
    std::string tok;
    while (d >> tok) {
      if (tok == "L")
        continue;
      if (tok[0] == 'M' || tok[0] == 'L')
        tok.erase(0, 1);
      std::string ys;
      d >> ys;
      p.emplace_back(detail::parse_double(tok), detail::parse_double(ys));
    }
    out.push_back(std::move(p));
    pos = end;
  }
  return out;
}

} // namespace maot
