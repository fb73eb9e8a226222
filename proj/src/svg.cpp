#include "glassbox/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace glassbox::svg {

namespace {

std::string rgb(int r, int g, int b) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

// White at 0, saturating blue for +1, red for -1.
std::string diverging_color(double v) {
  v = std::clamp(v, -1.0, 1.0);
  const int c = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(v))));
  return v >= 0 ? rgb(c, c, 255) : rgb(255, c, c);
}

std::string header(int width, int height, const std::string& title) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
     << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"10\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">"
     << title << "</text>\n";
  return os.str();
}

}  // namespace

std::string heatmap(const std::vector<float>& values, int n_rows, int n_cols,
                    const std::string& title) {
  if (values.size() != static_cast<std::size_t>(n_rows) * n_cols) {
    throw std::invalid_argument("svg heatmap: shape mismatch");
  }
  double peak = 0.0;
  for (float v : values) peak = std::max(peak, std::abs(static_cast<double>(v)));
  if (peak <= 0.0) peak = 1.0;
  const int cell = std::max(2, 600 / std::max(n_rows, n_cols));
  const int ox = 10, oy = 30;
  std::ostringstream os;
  os << header(ox + n_cols * cell + 10, oy + n_rows * cell + 10, title);
  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < n_cols; ++c) {
      const double v = values[static_cast<std::size_t>(r) * n_cols + c] / peak;
      os << "<rect x=\"" << ox + c * cell << "\" y=\"" << oy + r * cell
         << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
         << diverging_color(v) << "\"/>\n";
    }
  }
  os << "</svg>\n";
  return os.str();
}

std::string line_profile(const std::vector<double>& grid,
                         const std::vector<double>& profile,
                         const std::string& title, const std::string& x_label,
                         const std::string& y_label) {
  if (grid.size() != profile.size() || grid.empty()) {
    throw std::invalid_argument("svg line_profile: shape mismatch");
  }
  const int w = 640, h = 400, ox = 60, oy = 40, pw = w - ox - 20,
            ph = h - oy - 50;
  const double x0 = grid.front(), x1 = grid.back();
  double y0 = profile[0], y1 = profile[0];
  for (double v : profile) {
    y0 = std::min(y0, v);
    y1 = std::max(y1, v);
  }
  if (y1 - y0 < 1e-12) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  auto px = [&](double x) {
    return ox + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * pw;
  };
  auto py = [&](double y) { return oy + ph - (y - y0) / (y1 - y0) * ph; };
  std::ostringstream os;
  os << header(w, h, title);
  os << "<line x1=\"" << ox << "\" y1=\"" << oy + ph << "\" x2=\"" << ox + pw
     << "\" y2=\"" << oy + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << ox << "\" y1=\"" << oy << "\" x2=\"" << ox << "\" y2=\""
     << oy + ph << "\" stroke=\"black\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    os << px(grid[i]) << "," << py(profile[i]) << " ";
  }
  os << "\"/>\n";
  os << "<text x=\"" << ox + pw / 2 << "\" y=\"" << h - 10
     << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
     << x_label << "</text>\n";
  os << "<text x=\"15\" y=\"" << oy + ph / 2
     << "\" font-family=\"sans-serif\" font-size=\"12\" "
        "transform=\"rotate(-90 15 "
     << oy + ph / 2 << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string scatter(const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::vector<std::uint8_t>& clazz,
                    const std::string& title) {
  if (xs.size() != ys.size() || xs.size() != clazz.size() || xs.empty()) {
    throw std::invalid_argument("svg scatter: shape mismatch");
  }
  const int w = 560, h = 560, ox = 40, oy = 40, pw = w - ox - 20,
            ph = h - oy - 30;
  double x0 = xs[0], x1 = xs[0], y0 = ys[0], y1 = ys[0];
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x0 = std::min(x0, xs[i]);
    x1 = std::max(x1, xs[i]);
    y0 = std::min(y0, ys[i]);
    y1 = std::max(y1, ys[i]);
  }
  if (x1 - x0 < 1e-12) x1 = x0 + 1;
  if (y1 - y0 < 1e-12) y1 = y0 + 1;
  std::ostringstream os;
  os << header(w, h, title);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double px = ox + (xs[i] - x0) / (x1 - x0) * pw;
    const double py = oy + ph - (ys[i] - y0) / (y1 - y0) * ph;
    os << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\""
       << (clazz[i] ? "#d62728" : "#1f77b4") << "\" fill-opacity=\"0.7\"/>\n";
  }
  os << "<text x=\"" << ox << "\" y=\"" << h - 8
     << "\" font-family=\"sans-serif\" font-size=\"12\">blue = healthy, red = "
        "disease</text>\n";
  os << "</svg>\n";
  return os.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("svg: cannot write " + path.string());
  out << content;
}

}  // namespace glassbox::svg
