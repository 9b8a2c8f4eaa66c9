#pragma once

#include <opencv2/core.hpp>

#include "htr/data/image.hpp"

namespace htr::data::detail {

inline cv::Mat as_mat(const GrayImage& img) {
  return cv::Mat(static_cast<int>(img.height), static_cast<int>(img.width), CV_8UC1,
                 const_cast<std::uint8_t*>(img.pixels.data()));
}

inline GrayImage from_mat(const cv::Mat& m) {
  CV_Assert(m.type() == CV_8UC1);
  GrayImage out(static_cast<std::size_t>(m.rows), static_cast<std::size_t>(m.cols));
  for (int y = 0; y < m.rows; ++y) {
    const auto* src = m.ptr<std::uint8_t>(y);
    std::copy(src, src + m.cols, out.pixels.data() + static_cast<std::size_t>(y) * out.width);
  }
  return out;
}

}  // namespace htr::data::detail
