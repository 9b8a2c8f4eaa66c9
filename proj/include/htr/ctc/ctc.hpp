#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "htr/core/tensor.hpp"

namespace htr::ctc {

/// Vocabulary ids of one target transcription; never contains the blank id.
using LabelSequence = std::vector<std::uint32_t>;

template <typename T>
struct CtcResult {
  T loss;           // -log p(labels | logits); +inf when infeasible
  Tensor<T> grad;   // d loss / d logits, T x V; all zero when infeasible
  bool feasible;
};

/// Minimum number of frames a label sequence needs: L plus one separating blank per
/// adjacent equal pair.
std::size_t min_frames(std::span<const std::uint32_t> labels);

/// CTC loss over a T x V logit matrix (softmax taken over V, blank included).
/// Lattice arithmetic runs in the log domain in double precision regardless of T.
/// Throws DomainError on NaN logits and ShapeError on label ids out of range or equal
/// to the blank.
template <typename T>
CtcResult<T> ctc_loss(const Tensor<T>& logits, std::span<const std::uint32_t> labels,
                      std::uint32_t blank);

template <typename T>
struct BatchCtcResult {
  T mean_loss;                 // mean over feasible samples
  Tensor<T> grad;              // B x T x V, already scaled by 1 / feasible count
  std::vector<bool> feasible;
  std::size_t feasible_count;
};

/// Per-batch objective: mean over samples of per-sample CTC loss. Samples are
/// independent and evaluated in parallel. `frames`, when non-empty, gives each
/// sample's valid prefix of the time axis; later frames get zero gradient.
template <typename T>
BatchCtcResult<T> ctc_loss_batch(const Tensor<T>& logits, const std::vector<LabelSequence>& labels,
                                 std::uint32_t blank, std::span<const std::size_t> frames = {});

/// Per-frame argmax, then collapse consecutive duplicates, then drop blanks.
/// Ties in the argmax resolve to the lowest class id.
template <typename T>
LabelSequence greedy_decode(std::span<const T> logits, std::size_t frames, std::size_t classes,
                            std::uint32_t blank);

template <typename T>
LabelSequence greedy_decode(const Tensor<T>& logits, std::uint32_t blank) {
  if (logits.rank() != 2) throw ShapeError("greedy_decode expects T x V logits");
  return greedy_decode<T>(logits.data(), logits.dim(0), logits.dim(1), blank);
}

/// Code-point reversal. Used on right-to-left targets at training time and on decoded
/// output before scoring.
std::u32string reverse_labels(std::u32string_view s);
std::string reverse_labels_utf8(std::string_view s);

}  // namespace htr::ctc
