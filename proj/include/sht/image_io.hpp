#pragma once

#include <filesystem>

#include "sht/core.hpp"

namespace sht {

/// Reads any format OpenCV understands into a 3×H×W RGB tensor in [0,1].
ImageTensor read_image(const std::filesystem::path& path, ImageRole role = ImageRole::HR);

/// Writes an 8-bit image (values rounded from [0,1]); the format follows the extension.
void write_image(const ImageTensor& image, const std::filesystem::path& path);

bool is_image_file(const std::filesystem::path& path);

}  // namespace sht
