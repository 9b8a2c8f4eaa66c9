#pragma once

#include "htr/core/rng.hpp"
#include "htr/data/image.hpp"

namespace htr::data {

/// Each family fires independently with its probability. Magnitudes are the extreme
/// values of uniformly drawn parameters.
struct AugmentConfig {
  double p_affine = 0.5;
  double rotate_deg = 2.0;
  double shear_deg = 5.0;
  double scale = 0.05;

  double p_distort = 0.5;  // elastic or grid distortion, chosen with equal odds
  double elastic_alpha = 2.0;  // displacement amplitude in pixels
  double elastic_sigma = 4.0;  // smoothing of the displacement field
  std::size_t grid_cells = 4;
  double grid_jitter = 0.15;  // fraction of a cell

  double p_morph = 0.5;  // erosion or dilation with a 2x2 element

  double p_photometric = 0.5;
  double brightness = 0.2;  // fraction of full scale
  double contrast = 0.2;

  static AugmentConfig disabled();
};

/// Applies the configured families in a fixed order (affine, distortion, morphology,
/// photometric). Geometry is preserved: output size equals input size.
GrayImage augment(const GrayImage& image, RngStream& rng, const AugmentConfig& cfg = {});

/// out = clamp(round((in - 127.5) * contrast + 127.5 + 255 * brightness)).
GrayImage adjust_brightness_contrast(const GrayImage& image, double brightness, double contrast);

}  // namespace htr::data
