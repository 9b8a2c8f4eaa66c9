#include "htr/data/augment.hpp"

#include <cmath>
#include <numbers>
#include <opencv2/imgproc.hpp>

#include "cv_bridge.hpp"

namespace htr::data {
namespace {

double symmetric(RngStream& rng, double magnitude) { return rng.uniform(-magnitude, magnitude); }

cv::Mat random_affine(const cv::Mat& src, RngStream& rng, const AugmentConfig& cfg, std::uint8_t fill) {
  const double angle = symmetric(rng, cfg.rotate_deg) * std::numbers::pi / 180.0;
  const double shear = std::tan(symmetric(rng, cfg.shear_deg) * std::numbers::pi / 180.0);
  const double scale = 1.0 + symmetric(rng, cfg.scale);
  const double cx = src.cols / 2.0, cy = src.rows / 2.0;
  // x' = S * R * Sh * (x - c) + c
  const double ca = std::cos(angle) * scale, sa = std::sin(angle) * scale;
  const double a00 = ca, a01 = ca * shear - sa;
  const double a10 = sa, a11 = sa * shear + ca;
  cv::Mat m = (cv::Mat_<double>(2, 3) << a00, a01, cx - a00 * cx - a01 * cy,  //
               a10, a11, cy - a10 * cx - a11 * cy);
  cv::Mat out;
  cv::warpAffine(src, out, m, src.size(), cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar(fill));
  return out;
}

cv::Mat elastic(const cv::Mat& src, RngStream& rng, const AugmentConfig& cfg, std::uint8_t fill) {
  cv::Mat dx(src.size(), CV_32F), dy(src.size(), CV_32F);
  for (int y = 0; y < src.rows; ++y) {
    for (int x = 0; x < src.cols; ++x) {
      dx.at<float>(y, x) = static_cast<float>(rng.uniform(-1.0, 1.0));
      dy.at<float>(y, x) = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
  }
  const int k = 2 * static_cast<int>(std::ceil(3 * cfg.elastic_sigma)) + 1;
  cv::GaussianBlur(dx, dx, cv::Size(k, k), cfg.elastic_sigma);
  cv::GaussianBlur(dy, dy, cv::Size(k, k), cfg.elastic_sigma);
  // blurred white noise has a small spread; rescale so the peak displacement is alpha
  double lo, hi;
  cv::minMaxLoc(cv::abs(dx), &lo, &hi);
  const double sx = hi > 0 ? cfg.elastic_alpha / hi : 0.0;
  cv::minMaxLoc(cv::abs(dy), &lo, &hi);
  const double sy = hi > 0 ? cfg.elastic_alpha / hi : 0.0;
  cv::Mat map_x(src.size(), CV_32F), map_y(src.size(), CV_32F);
  for (int y = 0; y < src.rows; ++y) {
    for (int x = 0; x < src.cols; ++x) {
      map_x.at<float>(y, x) = static_cast<float>(x + sx * dx.at<float>(y, x));
      map_y.at<float>(y, x) = static_cast<float>(y + sy * dy.at<float>(y, x));
    }
  }
  cv::Mat out;
  cv::remap(src, out, map_x, map_y, cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar(fill));
  return out;
}

cv::Mat grid_distort(const cv::Mat& src, RngStream& rng, const AugmentConfig& cfg, std::uint8_t fill) {
  // random offsets at the interior grid nodes, bilinearly interpolated in between
  const std::size_t n = std::max<std::size_t>(cfg.grid_cells, 1);
  const double cell_w = static_cast<double>(src.cols) / static_cast<double>(n);
  const double cell_h = static_cast<double>(src.rows) / static_cast<double>(n);
  std::vector<double> ox((n + 1) * (n + 1), 0.0), oy((n + 1) * (n + 1), 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t j = 1; j < n; ++j) {
      ox[i * (n + 1) + j] = symmetric(rng, cfg.grid_jitter) * cell_w;
      oy[i * (n + 1) + j] = symmetric(rng, cfg.grid_jitter) * cell_h;
    }
  }
  cv::Mat map_x(src.size(), CV_32F), map_y(src.size(), CV_32F);
  for (int y = 0; y < src.rows; ++y) {
    const double gy = std::min(y / cell_h, static_cast<double>(n) - 1e-9);
    const auto i = static_cast<std::size_t>(gy);
    const double fy = gy - static_cast<double>(i);
    for (int x = 0; x < src.cols; ++x) {
      const double gx = std::min(x / cell_w, static_cast<double>(n) - 1e-9);
      const auto j = static_cast<std::size_t>(gx);
      const double fx = gx - static_cast<double>(j);
      auto lerp2 = [&](const std::vector<double>& o) {
        const double top = o[i * (n + 1) + j] * (1 - fx) + o[i * (n + 1) + j + 1] * fx;
        const double bot = o[(i + 1) * (n + 1) + j] * (1 - fx) + o[(i + 1) * (n + 1) + j + 1] * fx;
        return top * (1 - fy) + bot * fy;
      };
      map_x.at<float>(y, x) = static_cast<float>(x + lerp2(ox));
      map_y.at<float>(y, x) = static_cast<float>(y + lerp2(oy));
    }
  }
  cv::Mat out;
  cv::remap(src, out, map_x, map_y, cv::INTER_LINEAR, cv::BORDER_CONSTANT, cv::Scalar(fill));
  return out;
}

cv::Mat morphology(const cv::Mat& src, RngStream& rng, std::uint8_t background) {
  const cv::Mat element = cv::getStructuringElement(cv::MORPH_RECT, cv::Size(2, 2));
  // "thicken ink" means erode on light backgrounds and dilate on dark ones
  const bool thicken = rng.bernoulli(0.5);
  const bool light_background = background >= 128;
  cv::Mat out;
  if (thicken == light_background) cv::erode(src, out, element);
  else cv::dilate(src, out, element);
  return out;
}

}  // namespace

AugmentConfig AugmentConfig::disabled() {
  AugmentConfig c;
  c.p_affine = c.p_distort = c.p_morph = c.p_photometric = 0.0;
  return c;
}

GrayImage adjust_brightness_contrast(const GrayImage& image, double brightness, double contrast) {
  GrayImage out = image;
  for (auto& p : out.pixels) {
    const double v = (static_cast<double>(p) - 127.5) * contrast + 127.5 + 255.0 * brightness;
    p = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return out;
}

GrayImage augment(const GrayImage& image, RngStream& rng, const AugmentConfig& cfg) {
  if (image.empty()) return image;
  // draw every decision up front so the consumed stream length does not depend on the image
  const bool do_affine = rng.bernoulli(cfg.p_affine);
  const bool do_distort = rng.bernoulli(cfg.p_distort);
  const bool use_grid = rng.bernoulli(0.5);
  const bool do_morph = rng.bernoulli(cfg.p_morph);
  const bool do_photo = rng.bernoulli(cfg.p_photometric);
  if (!do_affine && !do_distort && !do_morph && !do_photo) return image;

  RngStream local = rng.derive(rng.next_u64());
  const std::uint8_t fill = border_median(image);
  cv::Mat m = detail::as_mat(image).clone();
  if (do_affine) m = random_affine(m, local, cfg, fill);
  if (do_distort) m = use_grid ? grid_distort(m, local, cfg, fill) : elastic(m, local, cfg, fill);
  if (do_morph) m = morphology(m, local, fill);
  GrayImage out = detail::from_mat(m);
  if (do_photo) {
    out = adjust_brightness_contrast(out, symmetric(local, cfg.brightness), 1.0 + symmetric(local, cfg.contrast));
  }
  return out;
}

}  // namespace htr::data
