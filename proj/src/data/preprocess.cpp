#include "htr/data/preprocess.hpp"

#include <cmath>
#include <opencv2/imgproc.hpp>

#include "cv_bridge.hpp"
#include "htr/core/errors.hpp"

namespace htr::data {

ScaledSize scaled_size(std::size_t height, std::size_t width, const PreprocessConfig& cfg) {
  if (height == 0 || width == 0) throw DataError("cannot preprocess a zero-area image");
  const double ratio = static_cast<double>(cfg.height) / static_cast<double>(height);
  auto w = static_cast<std::size_t>(std::llround(static_cast<double>(width) * ratio));
  w = std::clamp<std::size_t>(w, 1, cfg.max_width);
  return {cfg.height, w};
}

Preprocessed preprocess_image(const GrayImage& image, const PreprocessConfig& cfg) {
  const auto size = scaled_size(image.height, image.width, cfg);
  const std::uint8_t background = border_median(image);
  cv::Mat resized;
  const cv::Mat src = detail::as_mat(image);
  if (size.height == image.height && size.width == image.width) {
    resized = src;
  } else {
    const bool shrinking = size.height < image.height && size.width < image.width;
    cv::resize(src, resized, cv::Size(static_cast<int>(size.width), static_cast<int>(size.height)), 0, 0,
               shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  }
  Preprocessed out{GrayImage(size.height, size.width + 2 * cfg.pad, background), background};
  for (std::size_t y = 0; y < size.height; ++y) {
    const auto* row = resized.ptr<std::uint8_t>(static_cast<int>(y));
    std::copy(row, row + size.width, out.image.pixels.data() + y * out.image.width + cfg.pad);
  }
  return out;
}

TensorF preprocess(const GrayImage& image, const PreprocessConfig& cfg) {
  const auto p = preprocess_image(image, cfg);
  TensorF out({1, p.image.height, p.image.width});
  constexpr float inv = 1.0f / 255.0f;
  for (std::size_t i = 0; i < p.image.pixels.size(); ++i) out[i] = static_cast<float>(p.image.pixels[i]) * inv;
  return out;
}

}  // namespace htr::data
