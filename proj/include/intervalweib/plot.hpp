#pragma once

// Reliability-curve CSV and minimal SVG line plots with a shaded band.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include "intervalweib/dataset.hpp"
#include "intervalweib/metrics.hpp"

namespace intervalweib {

/// Columns t, mean, lo, hi (and km when a Kaplan-Meier curve is given).
inline void write_curve_csv(const ReliabilityCurve& c, const std::string& path, const SurvivalCurve* km = nullptr) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path + "'");
  os << "t,mean,lo,hi" << (km ? ",km" : "") << '\n';
  for (std::size_t i = 0; i < c.times.size(); ++i) {
    os << detail::format_double(c.times[i]) << ',' << detail::format_double(c.mean[i]) << ','
       << detail::format_double(c.lower[i]) << ',' << detail::format_double(c.upper[i]);
    if (km) os << ',' << detail::format_double(km->at(c.times[i]));
    os << '\n';
  }
}

inline void write_curve_svg(const ReliabilityCurve& c, const std::string& title, const std::string& path,
                            const SurvivalCurve* km = nullptr) {
  constexpr double W = 640, H = 400, left = 60, right = 20, top = 40, bottom = 50;
  const double t_max = c.times.empty() ? 1.0 : std::max(c.times.back(), 1e-12);
  auto px = [&](double t) { return left + (W - left - right) * t / t_max; };
  auto py = [&](double r) { return top + (H - top - bottom) * (1.0 - r); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path + "'");
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << title << "</text>\n";
  // axes and ticks
  os << "<g stroke=\"black\" stroke-width=\"1\"><line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << W - right
     << "\" y2=\"" << py(0) << "\"/><line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\""
     << py(1) << "\"/></g>\n";
  os << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double r = i / 5.0, t = t_max * i / 5.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << num(py(r) + 4) << "\" text-anchor=\"end\">" << num(r) << "</text>\n";
    os << "<text x=\"" << num(px(t)) << "\" y=\"" << py(0) + 16 << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
  }
  os << "<text x=\"" << (W + left) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">age</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
     << ")\" text-anchor=\"middle\">reliability</text>\n</g>\n";

  if (!c.times.empty()) {
    os << "<path fill=\"steelblue\" fill-opacity=\"0.25\" stroke=\"none\" d=\"M";
    for (std::size_t i = 0; i < c.times.size(); ++i) os << ' ' << num(px(c.times[i])) << ',' << num(py(c.upper[i]));
    for (std::size_t i = c.times.size(); i-- > 0;) os << " L" << num(px(c.times[i])) << ',' << num(py(c.lower[i]));
    os << " Z\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < c.times.size(); ++i) os << (i ? " " : "") << num(px(c.times[i])) << ',' << num(py(c.mean[i]));
    os << "\"/>\n";
  }
  if (km) {
    os << "<polyline fill=\"none\" stroke=\"black\" stroke-dasharray=\"4 3\" points=\"" << num(px(0)) << ',' << num(py(1));
    double s = 1.0;
    for (std::size_t i = 0; i < km->times.size() && km->times[i] <= t_max; ++i) {
      os << ' ' << num(px(km->times[i])) << ',' << num(py(s));
      s = km->survival[i];
      os << ' ' << num(px(km->times[i])) << ',' << num(py(s));
    }
    os << ' ' << num(px(t_max)) << ',' << num(py(s)) << "\"/>\n";
  }
  os << "</svg>\n";
}

}  // namespace intervalweib
