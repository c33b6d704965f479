#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mitodet {

/// Interleaved 8-bit RGB raster, row-major.
class RgbImage {
 public:
  RgbImage() = default;
  /// Allocates width x height pixels filled with `fill` on every channel.
  RgbImage(int width, int height, std::uint8_t fill = 255);
  RgbImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const noexcept { return pixel_count() == 0; }

  std::uint8_t* pixel(int x, int y) noexcept { return data_.data() + offset(x, y); }
  const std::uint8_t* pixel(int x, int y) const noexcept {
    return data_.data() + offset(x, y);
  }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  /// Copies the size x size window at (x0, y0); pixels beyond the image are
  /// filled with `pad` (white by default).
  RgbImage crop(int x0, int y0, int size_x, int size_y, std::uint8_t pad = 255) const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x));
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace mitodet
