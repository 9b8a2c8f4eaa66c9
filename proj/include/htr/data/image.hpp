#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace htr::data {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), pixels(h * w, fill) {}

  bool empty() const noexcept { return pixels.empty(); }
  std::uint8_t& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
  bool operator==(const GrayImage&) const = default;
};

/// Loads any format OpenCV can decode, converted to grayscale. Throws DataError.
GrayImage load_image(const std::filesystem::path& path);
/// Writes a lossless PNG (or any format implied by the extension).
void save_image(const std::filesystem::path& path, const GrayImage& image);

/// Median of the pixels on the outer one-pixel frame; used as the padding fill.
std::uint8_t border_median(const GrayImage& image);

}  // namespace htr::data
