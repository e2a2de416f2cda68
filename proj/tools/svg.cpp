#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <iomanip>
#include <sstream>

namespace semimix::svg {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 90;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

double quantile_sorted(const std::vector<double>& v, double p) {
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Axis {
  double lo, hi;
  bool log;
  double to_px(double v, double px_lo, double px_hi) const {
    const double a = log ? std::log10(v) : v;
    const double b0 = log ? std::log10(lo) : lo, b1 = log ? std::log10(hi) : hi;
    return px_lo + (a - b0) / (b1 - b0) * (px_hi - px_lo);
  }
};

Axis make_axis(double lo, double hi, bool log) {
  if (log) {
    lo = std::pow(10.0, std::floor(std::log10(lo)));
    hi = std::pow(10.0, std::ceil(std::log10(hi)));
    if (hi <= lo) hi = lo * 10.0;
    return {lo, hi, true};
  }
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad, false};
}

void header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
}

void y_axis(std::ostringstream& out, const Axis& axis, const std::string& label) {
  const double y0 = kHeight - kBottom, y1 = kTop;
  out << "<line x1=\"" << kLeft << "\" y1=\"" << y0 << "\" x2=\"" << kLeft << "\" y2=\"" << y1
      << "\" stroke=\"black\"/>\n";
  std::vector<double> ticks;
  if (axis.log) {
    for (double t = axis.lo; t <= axis.hi * 1.0001; t *= 10.0) ticks.push_back(t);
  } else {
    for (int i = 0; i <= 5; ++i) ticks.push_back(axis.lo + (axis.hi - axis.lo) * i / 5.0);
  }
  for (double t : ticks) {
    const double py = axis.to_px(t, y0, y1);
    out << "<line x1=\"" << kLeft - 4 << "\" y1=\"" << py << "\" x2=\"" << kLeft << "\" y2=\"" << py
        << "\" stroke=\"black\"/>\n<text x=\"" << kLeft - 6 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\">" << std::setprecision(3) << t << "</text>\n";
  }
  out << "<text transform=\"translate(16," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(label) << "</text>\n";
}

}  // namespace

std::string boxplot(const std::vector<BoxGroup>& groups, const std::string& title,
                    const std::string& y_label, bool log_scale) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& g : groups) {
    for (double v : g.values) {
      if (log_scale && v <= 0.0) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) {
    lo = log_scale ? 1e-3 : 0.0;
    hi = 1.0;
  }
  const Axis axis = make_axis(lo, hi, log_scale);
  std::ostringstream out;
  header(out, title);
  y_axis(out, axis, y_label);
  const double y0 = kHeight - kBottom, y1 = kTop;
  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(std::max<std::size_t>(1, groups.size()));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double cx = kLeft + slot * (static_cast<double>(g) + 0.5);
    const double half = std::min(30.0, slot * 0.3);
    const char* colour = kPalette[g % 7];
    out << "<text x=\"" << cx << "\" y=\"" << y0 + 16 << "\" text-anchor=\"end\" transform=\"rotate(-30 " << cx
        << ' ' << y0 + 16 << ")\">" << escape(groups[g].label) << "</text>\n";
    std::vector<double> v;
    for (double x : groups[g].values) {
      if (std::isfinite(x) && (!log_scale || x > 0.0)) v.push_back(x);
    }
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const double q1 = quantile_sorted(v, 0.25), med = quantile_sorted(v, 0.5), q3 = quantile_sorted(v, 0.75);
    const double iqr = q3 - q1;
    double wlo = q3, whi = q1;
    for (double x : v) {
      if (x >= q1 - 1.5 * iqr) wlo = std::min(wlo, x);
      if (x <= q3 + 1.5 * iqr) whi = std::max(whi, x);
    }
    auto py = [&](double x) { return axis.to_px(x, y0, y1); };
    out << "<line x1=\"" << cx << "\" y1=\"" << py(wlo) << "\" x2=\"" << cx << "\" y2=\"" << py(q1)
        << "\" stroke=\"black\"/>\n<line x1=\"" << cx << "\" y1=\"" << py(q3) << "\" x2=\"" << cx << "\" y2=\""
        << py(whi) << "\" stroke=\"black\"/>\n";
    out << "<rect x=\"" << cx - half << "\" y=\"" << py(q3) << "\" width=\"" << 2 * half << "\" height=\""
        << std::max(0.5, py(q1) - py(q3)) << "\" fill=\"" << colour << "\" fill-opacity=\"0.35\" stroke=\""
        << colour << "\"/>\n";
    out << "<line x1=\"" << cx - half << "\" y1=\"" << py(med) << "\" x2=\"" << cx + half << "\" y2=\""
        << py(med) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
    for (double x : v) {
      if (x < wlo || x > whi) {
        out << "<circle cx=\"" << cx << "\" cy=\"" << py(x) << "\" r=\"2.5\" fill=\"none\" stroke=\"" << colour
            << "\"/>\n";
      }
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string line_plot(const std::vector<Series>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  const Axis xa = make_axis(xlo, xhi, false), ya = make_axis(ylo, yhi, false);
  std::ostringstream out;
  header(out, title);
  y_axis(out, ya, y_label);
  const double y0 = kHeight - kBottom, y1 = kTop, x0 = kLeft, x1 = kWidth - kRight;
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n";
  for (const auto& s : series) {
    for (double x : s.x) {
      const double px = xa.to_px(x, x0, x1);
      out << "<text x=\"" << px << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">" << std::setprecision(4)
          << x << "</text>\n";
    }
    break;
  }
  out << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << y0 + 40 << "\" text-anchor=\"middle\">" << escape(x_label)
      << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kPalette[s % 7];
    std::ostringstream path;
    bool first = true;
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!std::isfinite(series[s].y[i])) continue;
      const double px = xa.to_px(series[s].x[i], x0, x1), py = ya.to_px(series[s].y[i], y0, y1);
      path << (first ? "M" : " L") << px << ' ' << py;
      first = false;
      out << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
    }
    out << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"/>\n";
    out << "<text x=\"" << x0 + 10 << "\" y=\"" << y1 + 14 * (static_cast<double>(s) + 1) << "\" fill=\"" << colour
        << "\">" << escape(series[s].label) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace semimix::svg
