#pragma once

#include "hsicwae/common.hpp"
#include "hsicwae/csv.hpp"

#include <map>
#include <string>

namespace hsicwae::svg {

inline std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// SVG 1.1 scatter of (x, y) with one color per label.
inline std::string scatter(const Vector& x, const Vector& y, const Vector& labels, const std::string& x_label,
                           const std::string& y_label) {
  static const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  constexpr double kWidth = 640;
  constexpr double kHeight = 480;
  constexpr double kMargin = 50;
  const double x_lo = x.size() ? x.minCoeff() : 0.0;
  const double x_hi = x.size() ? x.maxCoeff() : 1.0;
  const double y_lo = y.size() ? y.minCoeff() : 0.0;
  const double y_hi = y.size() ? y.maxCoeff() : 1.0;
  const double x_span = x_hi > x_lo ? x_hi - x_lo : 1.0;
  const double y_span = y_hi > y_lo ? y_hi - y_lo : 1.0;
  const auto px = [&](double v) { return kMargin + (v - x_lo) / x_span * (kWidth - 2 * kMargin); };
  const auto py = [&](double v) { return kHeight - kMargin - (v - y_lo) / y_span * (kHeight - 2 * kMargin); };

  std::map<double, std::size_t> color_of;
  for (Eigen::Index i = 0; i < labels.size(); ++i) color_of.emplace(labels(i), 0);
  std::size_t next = 0;
  for (auto& [label, color] : color_of) color = next++ % (sizeof(kPalette) / sizeof(kPalette[0]));

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"640\" height=\"480\" viewBox=\"0 0 640 480\">\n";
  out += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  out += "<line x1=\"50\" y1=\"430\" x2=\"590\" y2=\"430\" stroke=\"black\"/>\n";
  out += "<line x1=\"50\" y1=\"50\" x2=\"50\" y2=\"430\" stroke=\"black\"/>\n";
  out += "<text x=\"320\" y=\"465\" text-anchor=\"middle\" font-size=\"14\">" + escape(x_label) + "</text>\n";
  out += "<text x=\"15\" y=\"240\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 15 240)\">" + escape(y_label) +
         "</text>\n";
  char buf[160];
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"%s\" fill-opacity=\"0.6\"/>\n",
                  px(x(i)), py(y(i)), kPalette[color_of[labels(i)]]);
    out += buf;
  }
  double legend_y = 60;
  for (const auto& [label, color] : color_of) {
    std::snprintf(buf, sizeof(buf), "<circle cx=\"570\" cy=\"%.0f\" r=\"5\" fill=\"%s\"/>\n", legend_y, kPalette[color]);
    out += buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"580\" y=\"%.0f\" font-size=\"12\">%s</text>\n", legend_y + 4,
                  csv::fmt(label).c_str());
    out += buf;
    legend_y += 18;
  }
  out += "</svg>\n";
  return out;
}

}  // namespace hsicwae::svg
