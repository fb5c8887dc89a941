#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cordmorph::svg {

/// Maps a data interval onto a pixel interval.
struct LinearScale {
  double d0, d1, p0, p1;
  double operator()(double v) const { return d1 == d0 ? 0.5 * (p0 + p1) : p0 + (v - d0) * (p1 - p0) / (d1 - d0); }
};

/// Hand-emitted SVG with a fixed 960x540 viewBox. Elements are written in
/// insertion order and numbers with fixed precision, so equal inputs give
/// byte-identical files.
class Document {
 public:
  static constexpr int kWidth = 960;
  static constexpr int kHeight = 540;

  explicit Document(std::string_view title);

  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0,
            std::string_view dash = {});
  void circle(double cx, double cy, double r, std::string_view fill, double opacity = 1.0);
  void rect(double x, double y, double w, double h, std::string_view fill, double opacity = 1.0);
  void polyline(const std::vector<std::pair<double, double>>& points, std::string_view stroke, double width = 1.5);
  /// Closed filled polygon (used for bands).
  void polygon(const std::vector<std::pair<double, double>>& points, std::string_view fill, double opacity);
  void text(double x, double y, std::string_view content, int size = 12, std::string_view anchor = "start");

  /// Frame, ticks and labels for a plot area; returns the x/y scales.
  std::pair<LinearScale, LinearScale> axes(double x0, double x1, double y0, double y1, std::string_view x_label,
                                           std::string_view y_label, double left = 80, double right = 920,
                                           double top = 60, double bottom = 480, bool x_ticks = true);

  std::string str() const;

 private:
  std::string body_;
};

std::string escape(std::string_view text);
std::string fmt(double v);

/// Tick-friendly range covering [lo, hi] with a little padding.
std::pair<double, double> padded_range(double lo, double hi);

}  // namespace cordmorph::svg
