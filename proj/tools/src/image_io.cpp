#include "image_io.hpp"

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "mitodet/error.hpp"

namespace mitodet::app {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

}  // namespace

bool is_image_path(const std::filesystem::path& path) {
  const auto ext = lower_extension(path);
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

RgbImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw InputError("cannot read image '" + path.string() + "': no such file");
  }
  const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw InputError("cannot decode image '" + path.string() + "'");
  if (mat.depth() != CV_8U) {
    throw InputError("image '" + path.string() + "' is not 8-bit");
  }
  const int channels = mat.channels();
  if (channels != 1 && channels != 3 && channels != 4) {
    throw InputError("image '" + path.string() + "' has " + std::to_string(channels) +
                     " channels");
  }
  RgbImage out(mat.cols, mat.rows);
  for (int y = 0; y < mat.rows; ++y) {
    const std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < mat.cols; ++x) {
      const std::uint8_t* src = row + static_cast<std::ptrdiff_t>(x) * channels;
      std::uint8_t* dst = out.pixel(x, y);
      if (channels == 1) {
        dst[0] = dst[1] = dst[2] = src[0];
      } else {
        // OpenCV stores BGR(A).
        dst[0] = src[2];
        dst[1] = src[1];
        dst[2] = src[0];
      }
    }
  }
  return out;
}

std::string encode_image(const std::filesystem::path& path, const RgbImage& image) {
  if (!is_image_path(path)) {
    throw InvalidArgument("output image '" + path.string() + "' must end in .png, .tif or .tiff");
  }
  cv::Mat mat(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    std::uint8_t* row = mat.ptr<std::uint8_t>(y);
    for (int x = 0; x < image.width(); ++x) {
      const std::uint8_t* src = image.pixel(x, y);
      row[3 * x] = src[2];
      row[3 * x + 1] = src[1];
      row[3 * x + 2] = src[0];
    }
  }
  std::vector<std::uint8_t> bytes;
  const std::string ext = lower_extension(path) == ".png" ? ".png" : ".tiff";
  if (!cv::imencode(ext, mat, bytes)) {
    throw InputError("cannot encode image '" + path.string() + "'");
  }
  return {bytes.begin(), bytes.end()};
}

}  // namespace mitodet::app
