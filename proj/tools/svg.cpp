#include "svg.hpp"

#include <algorithm>
#include <sstream>

#include "diffstruct/io.hpp"

namespace diffstruct::app {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

void write_svg_plot(const std::filesystem::path& path, const std::string& title,
                    std::span<const double> x, std::span<const double> y) {
  const double w = 640, h = 400, pad = 40;
  const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
  const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
  const double x0 = x.empty() ? 0.0 : *xlo, x1 = x.empty() ? 1.0 : *xhi;
  const double y0 = y.empty() ? 0.0 : *ylo, y1 = y.empty() ? 1.0 : *yhi;
  const double sx = x1 > x0 ? (w - 2 * pad) / (x1 - x0) : 1.0;
  const double sy = y1 > y0 ? (h - 2 * pad) / (y1 - y0) : 1.0;

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
    << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << w - 2 * pad << "\" height=\""
    << h - 2 * pad << "\" fill=\"none\" stroke=\"#888\"/>\n"
    << "<text x=\"" << pad << "\" y=\"" << pad - 12 << "\" font-size=\"14\">" << title << "</text>\n"
    << "<text x=\"" << pad << "\" y=\"" << h - pad + 16 << "\" font-size=\"11\">" << fmt(x0) << "</text>\n"
    << "<text x=\"" << w - pad << "\" y=\"" << h - pad + 16
    << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(x1) << "</text>\n"
    << "<text x=\"" << pad - 4 << "\" y=\"" << h - pad << "\" font-size=\"11\" text-anchor=\"end\">"
    << fmt(y0) << "</text>\n"
    << "<text x=\"" << pad - 4 << "\" y=\"" << pad + 10 << "\" font-size=\"11\" text-anchor=\"end\">"
    << fmt(y1) << "</text>\n"
    << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  const std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s << ' ';
    s << fmt(pad + (x[i] - x0) * sx) << ',' << fmt(h - pad - (y[i] - y0) * sy);
  }
  s << "\"/>\n</svg>\n";
  write_text_file(path, s.str());
}

}  // namespace diffstruct::app
