#include "htr/data/image.hpp"

#include <algorithm>
#include <opencv2/imgcodecs.hpp>

#include "htr/core/errors.hpp"

namespace htr::data {

GrayImage load_image(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw DataError("cannot read image " + path.string());
  GrayImage out(static_cast<std::size_t>(m.rows), static_cast<std::size_t>(m.cols));
  for (int y = 0; y < m.rows; ++y) {
    std::copy_n(m.ptr<std::uint8_t>(y), m.cols, out.pixels.data() + static_cast<std::size_t>(y) * out.width);
  }
  return out;
}

void save_image(const std::filesystem::path& path, const GrayImage& image) {
  if (image.empty()) throw DataError("refusing to write an empty image to " + path.string());
  const cv::Mat m(static_cast<int>(image.height), static_cast<int>(image.width), CV_8UC1,
                  const_cast<std::uint8_t*>(image.pixels.data()));
  if (!cv::imwrite(path.string(), m)) throw DataError("cannot write image " + path.string());
}

std::uint8_t border_median(const GrayImage& image) {
  if (image.empty()) throw DataError("border_median of an empty image");
  std::vector<std::uint8_t> border;
  border.reserve(2 * (image.height + image.width));
  for (std::size_t x = 0; x < image.width; ++x) {
    border.push_back(image.at(0, x));
    if (image.height > 1) border.push_back(image.at(image.height - 1, x));
  }
  for (std::size_t y = 1; y + 1 < image.height; ++y) {
    border.push_back(image.at(y, 0));
    if (image.width > 1) border.push_back(image.at(y, image.width - 1));
  }
  auto mid = border.begin() + static_cast<std::ptrdiff_t>(border.size() / 2);
  std::nth_element(border.begin(), mid, border.end());
  return *mid;
}

}  // namespace htr::data
