#include "mitodet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mitodet/error.hpp"

namespace mitodet {

bool PixelBox::valid(double x_min, double y_min, double x_max, double y_max) noexcept {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max;
}

PixelBox::PixelBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!valid(x_min, y_min, x_max, y_max)) {
    std::ostringstream os;
    os << "invalid box [" << x_min << ", " << y_min << ", " << x_max << ", " << y_max
       << "]: extents must be finite with min < max";
    throw InvalidArgument(os.str());
  }
}

std::string to_string(const PixelBox& box) {
  std::ostringstream os;
  os << '[' << box.x_min() << ", " << box.y_min() << ", " << box.x_max() << ", "
     << box.y_max() << ']';
  return os.str();
}

double iou(const PixelBox& a, const PixelBox& b) noexcept {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double center_distance(const PixelBox& box, Point p) noexcept {
  const Point c = box.center();
  return std::hypot(c.x - p.x, c.y - p.y);
}

}  // namespace mitodet
