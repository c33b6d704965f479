#pragma once

#include <string>

namespace mitodet {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned box with real-valued extents. Construction enforces finite
/// coordinates and strictly positive width and height, so every PixelBox has
/// a positive area.
class PixelBox {
 public:
  /// Throws InvalidArgument when the extents are degenerate or non-finite.
  PixelBox(double x_min, double y_min, double x_max, double y_max);

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }

  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }
  double area() const noexcept { return width() * height(); }
  Point center() const noexcept {
    return {0.5 * (x_min_ + x_max_), 0.5 * (y_min_ + y_max_)};
  }

  PixelBox translated(double dx, double dy) const {
    return {x_min_ + dx, y_min_ + dy, x_max_ + dx, y_max_ + dy};
  }

  static bool valid(double x_min, double y_min, double x_max, double y_max) noexcept;

  friend bool operator==(const PixelBox&, const PixelBox&) = default;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

std::string to_string(const PixelBox& box);

/// Intersection over union; 0 for disjoint boxes.
double iou(const PixelBox& a, const PixelBox& b) noexcept;

/// Euclidean distance from the box center to `p`.
double center_distance(const PixelBox& box, Point p) noexcept;

}  // namespace mitodet
