#include "mitodet/image.hpp"

#include <algorithm>
#include <string>

#include "mitodet/error.hpp"

namespace mitodet {

RgbImage::RgbImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw InvalidArgument("negative image size");
  data_.assign(3 * pixel_count(), fill);
}

RgbImage::RgbImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0) throw InvalidArgument("negative image size");
  if (data_.size() != 3 * pixel_count()) {
    throw InvalidArgument("RGB buffer holds " + std::to_string(data_.size()) +
                          " bytes, expected " + std::to_string(3 * pixel_count()));
  }
}

RgbImage RgbImage::crop(int x0, int y0, int size_x, int size_y, std::uint8_t pad) const {
  RgbImage out(size_x, size_y, pad);
  const int xs = std::max(x0, 0);
  const int xe = std::min(x0 + size_x, width_);
  const int ys = std::max(y0, 0);
  const int ye = std::min(y0 + size_y, height_);
  if (xs >= xe || ys >= ye) return out;
  const std::size_t row_bytes = 3 * static_cast<std::size_t>(xe - xs);
  for (int y = ys; y < ye; ++y) {
    std::copy_n(pixel(xs, y), row_bytes, out.pixel(xs - x0, y - y0));
  }
  return out;
}

}  // namespace mitodet
