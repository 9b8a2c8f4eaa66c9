#pragma once

#include "htr/core/tensor.hpp"
#include "htr/data/image.hpp"

namespace htr::data {

struct PreprocessConfig {
  std::size_t height = 110;
  std::size_t max_width = 1450;
  std::size_t pad = 64;

  std::size_t max_padded_width() const { return max_width + 2 * pad; }
};

/// Content size after the height/width rules, before padding:
/// scale to `height` keeping aspect; if the width then exceeds `max_width`, the
/// line is squashed horizontally to exactly `max_width` (height stays fixed).
struct ScaledSize {
  std::size_t height;
  std::size_t width;
};
ScaledSize scaled_size(std::size_t height, std::size_t width, const PreprocessConfig& cfg = {});

/// Resized, padded raster (8-bit) plus the background value used for the padding.
struct Preprocessed {
  GrayImage image;
  std::uint8_t background;
};
Preprocessed preprocess_image(const GrayImage& image, const PreprocessConfig& cfg = {});

/// Full contract: 1 x height x (scaled width + 2 pad) tensor with values in [0, 1].
TensorF preprocess(const GrayImage& image, const PreprocessConfig& cfg = {});

}  // namespace htr::data
