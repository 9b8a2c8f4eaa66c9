#include "htr/data/batch.hpp"

#include <algorithm>

#include "htr/core/errors.hpp"
#include "htr/core/utf8.hpp"

namespace htr::data {

Batch assemble_batch(const std::vector<SampleRef>& samples, const Vocabulary& vocab, const BatchOptions& opts) {
  if (samples.empty()) throw DataError("cannot assemble an empty batch");
  if (opts.augment && !opts.augment_base) throw ConfigError("augmentation requested without a random stream");
  const std::size_t n = samples.size();
  std::vector<Preprocessed> pre(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const GrayImage& raw = samples[i].dataset->image(samples[i].index);
      if (opts.augment) {
        RngStream rng = opts.augment_base->derive(opts.first_draw + i);
        pre[i] = preprocess_image(augment(raw, rng, *opts.augment), opts.preprocess);
      } else {
        pre[i] = preprocess_image(raw, opts.preprocess);
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw DataError(e);
  }

  Batch batch;
  const std::size_t height = opts.preprocess.height;
  std::size_t max_w = 0;
  for (const auto& p : pre) max_w = std::max(max_w, p.image.width);
  batch.images = TensorF({n, 1, height, max_w});
  constexpr float inv = 1.0f / 255.0f;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& img = pre[i].image;
    const float bg = static_cast<float>(pre[i].background) * inv;
    float* dst = batch.images.ptr() + i * height * max_w;
    for (std::size_t y = 0; y < height; ++y) {
      float* row = dst + y * max_w;
      const std::uint8_t* src = img.pixels.data() + y * img.width;
      for (std::size_t x = 0; x < img.width; ++x) row[x] = static_cast<float>(src[x]) * inv;
      std::fill(row + img.width, row + max_w, bg);
    }
    batch.widths.push_back(img.width);
    auto text = utf8::decode(samples[i].sample().text);
    if (opts.encode_labels) {
      batch.labels.push_back(vocab.encode(opts.reverse_labels ? ctc::reverse_labels(text) : text));
    }
    batch.texts.push_back(std::move(text));
  }
  return batch;
}

}  // namespace htr::data
