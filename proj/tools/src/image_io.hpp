#pragma once

#include <filesystem>
#include <string>

#include "mitodet/image.hpp"

namespace mitodet::app {

/// Reads an 8-bit PNG or TIFF as RGB. Gray images are replicated to three
/// channels and alpha is dropped. Anything else throws InputError.
RgbImage read_image(const std::filesystem::path& path);

/// Encodes as PNG or TIFF, chosen by the extension of `path`.
std::string encode_image(const std::filesystem::path& path, const RgbImage& image);

bool is_image_path(const std::filesystem::path& path);

}  // namespace mitodet::app
