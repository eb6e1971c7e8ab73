#pragma once

#include <filesystem>
#include <vector>

#include "pipgan/datamodel.hpp"

namespace pipgan {

/// Decodes an 8-bit PNG/JPEG, resizes (bilinear) so the shorter side equals
/// `size`, center-crops to size x size and normalizes to [0, 1].
Image load_image(const std::filesystem::path& path, int size);

/// Writes an 8-bit PNG. Values are clamped to [0, 1] and rounded.
void save_png(const Image& image, const std::filesystem::path& path);

/// Converts to 8-bit RGB interleaved bytes (HWC).
std::vector<std::uint8_t> to_rgb8(const Image& image);
Image from_rgb8(const std::vector<std::uint8_t>& rgb, int height, int width);

/// Tiles `rows x cols` images (row-major) into one image with a 1-pixel gap.
Image tile_images(const std::vector<Image>& images, int rows, int cols);

}  // namespace pipgan
