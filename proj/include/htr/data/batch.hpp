#pragma once

#include <optional>
#include <string>
#include <vector>

#include "htr/data/augment.hpp"
#include "htr/data/mixture.hpp"
#include "htr/data/preprocess.hpp"
#include "htr/data/vocab.hpp"

namespace htr::data {

struct Batch {
  TensorF images;                        // B x 1 x H x Wmax
  std::vector<ctc::LabelSequence> labels;  // training order (reversed when configured)
  std::vector<std::u32string> texts;     // display order, as in the manifest
  std::vector<std::size_t> widths;       // padded width of each sample before batch padding
};

struct BatchOptions {
  PreprocessConfig preprocess;
  bool reverse_labels = true;
  /// Augmentation for training batches; nullopt for evaluation.
  std::optional<AugmentConfig> augment;
  /// Stream keyed per sample draw: sample i of the batch uses base.derive(first_draw + i).
  std::optional<RngStream> augment_base;
  std::uint64_t first_draw = 0;
  /// When false, labels are left empty (used for references outside the vocabulary).
  bool encode_labels = true;
};

/// Preprocesses (and optionally augments) the samples, pads each to the widest one
/// with its own background value, and encodes the transcriptions.
Batch assemble_batch(const std::vector<SampleRef>& samples, const Vocabulary& vocab, const BatchOptions& opts);

}  // namespace htr::data
