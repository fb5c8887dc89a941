#include "cordmorph/svg.hpp"

#include <cmath>
#include <cstdio>

namespace cordmorph::svg {

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", std::abs(v) < 0.005 ? 0.0 : v);
  return buf;
}

std::pair<double, double> padded_range(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (hi - lo < 1e-9) {
    const double pad = std::max(std::abs(lo) * 0.05, 1e-3);
    return {lo - pad, hi + pad};
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

Document::Document(std::string_view title) {
  body_ += "<rect x=\"0\" y=\"0\" width=\"960\" height=\"540\" fill=\"#ffffff\"/>\n";
  text(kWidth / 2.0, 30, title, 18, "middle");
}

void Document::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width,
                    std::string_view dash) {
  body_ += "<line x1=\"" + fmt(x1) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(x2) + "\" y2=\"" + fmt(y2) +
           "\" stroke=\"" + escape(stroke) + "\" stroke-width=\"" + fmt(width) + "\"";
  if (!dash.empty()) body_ += " stroke-dasharray=\"" + escape(dash) + "\"";
  body_ += "/>\n";
}

void Document::circle(double cx, double cy, double r, std::string_view fill, double opacity) {
  body_ += "<circle cx=\"" + fmt(cx) + "\" cy=\"" + fmt(cy) + "\" r=\"" + fmt(r) + "\" fill=\"" + escape(fill) +
           "\" fill-opacity=\"" + fmt(opacity) + "\"/>\n";
}

void Document::rect(double x, double y, double w, double h, std::string_view fill, double opacity) {
  body_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) + "\" height=\"" + fmt(h) +
           "\" fill=\"" + escape(fill) + "\" fill-opacity=\"" + fmt(opacity) + "\"/>\n";
}

namespace {
std::string point_list(const std::vector<std::pair<double, double>>& points) {
  std::string out;
  for (const auto& [x, y] : points) {
    if (!out.empty()) out.push_back(' ');
    out += fmt(x) + "," + fmt(y);
  }
  return out;
}
}  // namespace

void Document::polyline(const std::vector<std::pair<double, double>>& points, std::string_view stroke, double width) {
  if (points.empty()) return;
  body_ += "<polyline points=\"" + point_list(points) + "\" fill=\"none\" stroke=\"" + escape(stroke) +
           "\" stroke-width=\"" + fmt(width) + "\"/>\n";
}

void Document::polygon(const std::vector<std::pair<double, double>>& points, std::string_view fill, double opacity) {
  if (points.empty()) return;
  body_ += "<polygon points=\"" + point_list(points) + "\" fill=\"" + escape(fill) + "\" fill-opacity=\"" +
           fmt(opacity) + "\" stroke=\"none\"/>\n";
}

void Document::text(double x, double y, std::string_view content, int size, std::string_view anchor) {
  body_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           std::to_string(size) + "\" text-anchor=\"" + escape(anchor) + "\">" + escape(content) + "</text>\n";
}

std::pair<LinearScale, LinearScale> Document::axes(double x0, double x1, double y0, double y1, std::string_view x_label,
                                                   std::string_view y_label, double left, double right, double top,
                                                   double bottom, bool x_ticks) {
  const LinearScale xs{x0, x1, left, right};
  const LinearScale ys{y0, y1, bottom, top};
  line(left, bottom, right, bottom, "#000000");
  line(left, bottom, left, top, "#000000");
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4.0;
    const double yv = y0 + (y1 - y0) * t / 4.0;
    if (x_ticks) {
      line(xs(xv), bottom, xs(xv), bottom + 5, "#000000");
      text(xs(xv), bottom + 20, fmt(xv), 11, "middle");
    }
    line(left - 5, ys(yv), left, ys(yv), "#000000");
    text(left - 8, ys(yv) + 4, fmt(yv), 11, "end");
  }
  text(0.5 * (left + right), bottom + 45, x_label, 13, "middle");
  body_ += "<text x=\"20\" y=\"" + fmt(0.5 * (top + bottom)) +
           "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 20 " +
           fmt(0.5 * (top + bottom)) + ")\">" + escape(y_label) + "</text>\n";
  return {xs, ys};
}

std::string Document::str() const {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 960 540\" width=\"960\" height=\"540\">\n" +
         body_ + "</svg>\n";
}

}  // namespace cordmorph::svg
