#include "htr/ctc/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "htr/core/utf8.hpp"

namespace htr::ctc {
namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

std::size_t min_frames(std::span<const std::uint32_t> labels) {
  std::size_t repeats = 0;
  for (std::size_t i = 1; i < labels.size(); ++i) repeats += labels[i] == labels[i - 1];
  return labels.size() + repeats;
}

template <typename T>
CtcResult<T> ctc_loss(const Tensor<T>& logits, std::span<const std::uint32_t> labels,
                      std::uint32_t blank) {
  if (logits.rank() != 2) throw ShapeError("ctc_loss expects T x V logits, got " + shape_str(logits.shape()));
  const std::size_t frames = logits.dim(0), classes = logits.dim(1);
  if (blank >= classes) throw ShapeError("ctc_loss: blank id outside class range");
  for (auto id : labels) {
    if (id >= classes || id == blank) {
      throw ShapeError("ctc_loss: label id " + std::to_string(id) + " is invalid for " +
                       std::to_string(classes) + " classes with blank " + std::to_string(blank));
    }
  }
  for (auto v : logits.data()) {
    if (std::isnan(v)) throw DomainError("ctc_loss: NaN in logits");
  }

  CtcResult<T> result{std::numeric_limits<T>::infinity(), Tensor<T>(logits.shape()), false};
  if (frames < min_frames(labels)) return result;

  // log-softmax per frame
  std::vector<double> logp(frames * classes);
  for (std::size_t t = 0; t < frames; ++t) {
    const T* row = logits.ptr() + t * classes;
    double m = row[0];
    for (std::size_t k = 1; k < classes; ++k) m = std::max<double>(m, row[k]);
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) z += std::exp(static_cast<double>(row[k]) - m);
    const double lz = m + std::log(z);
    for (std::size_t k = 0; k < classes; ++k) logp[t * classes + k] = row[k] - lz;
  }

  // blank-interleaved targets: [blank, l1, blank, l2, ..., blank]
  const std::size_t states = 2 * labels.size() + 1;
  std::vector<std::uint32_t> ext(states, blank);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  auto skip_allowed = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

  std::vector<double> alpha(frames * states, kLogZero), beta(frames * states, kLogZero);
  alpha[0] = logp[blank];
  if (states > 1) alpha[1] = logp[ext[1]];
  for (std::size_t t = 1; t < frames; ++t) {
    const double* prev = alpha.data() + (t - 1) * states;
    double* cur = alpha.data() + t * states;
    for (std::size_t s = 0; s < states; ++s) {
      double a = prev[s];
      if (s >= 1) a = log_add(a, prev[s - 1]);
      if (skip_allowed(s)) a = log_add(a, prev[s - 2]);
      cur[s] = a == kLogZero ? kLogZero : a + logp[t * classes + ext[s]];
    }
  }
  const std::size_t last = (frames - 1) * states;
  beta[last + states - 1] = logp[(frames - 1) * classes + blank];
  if (states > 1) beta[last + states - 2] = logp[(frames - 1) * classes + ext[states - 2]];
  for (std::size_t t = frames - 1; t-- > 0;) {
    const double* next = beta.data() + (t + 1) * states;
    double* cur = beta.data() + t * states;
    for (std::size_t s = 0; s < states; ++s) {
      double b = next[s];
      if (s + 1 < states) b = log_add(b, next[s + 1]);
      if (s + 2 < states && ext[s] != blank && ext[s] != ext[s + 2]) b = log_add(b, next[s + 2]);
      cur[s] = b == kLogZero ? kLogZero : b + logp[t * classes + ext[s]];
    }
  }

  double log_prob = alpha[last + states - 1];
  if (states > 1) log_prob = log_add(log_prob, alpha[last + states - 2]);
  if (log_prob == kLogZero || !std::isfinite(log_prob)) return result;

  // d(-log p)/du_tk = y_tk - sum_{s: ext[s]=k} alpha_t(s) beta_t(s) / (y_tk p)
  std::vector<double> occupancy(classes);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kLogZero);
    for (std::size_t s = 0; s < states; ++s) {
      const double ab = alpha[t * states + s] + beta[t * states + s];
      if (alpha[t * states + s] == kLogZero || beta[t * states + s] == kLogZero) continue;
      occupancy[ext[s]] = log_add(occupancy[ext[s]], ab);
    }
    for (std::size_t k = 0; k < classes; ++k) {
      const double lp = logp[t * classes + k];
      double g = std::exp(lp);
      if (occupancy[k] != kLogZero) g -= std::exp(occupancy[k] - lp - log_prob);
      result.grad[t * classes + k] = static_cast<T>(g);
    }
  }
  result.loss = static_cast<T>(-log_prob);
  result.feasible = true;
  return result;
}

template <typename T>
BatchCtcResult<T> ctc_loss_batch(const Tensor<T>& logits, const std::vector<LabelSequence>& labels,
                                 std::uint32_t blank, std::span<const std::size_t> lengths) {
  if (logits.rank() != 3 || logits.dim(0) != labels.size()) {
    throw ShapeError("ctc_loss_batch expects B x T x V logits with B label sequences");
  }
  const std::size_t batch = logits.dim(0), frames = logits.dim(1), classes = logits.dim(2);
  if (!lengths.empty()) {
    if (lengths.size() != batch) throw ShapeError("ctc_loss_batch: one frame count per sample expected");
    for (auto n : lengths) {
      if (n == 0 || n > frames) throw ShapeError("ctc_loss_batch: frame count outside [1, T]");
    }
  }
  const std::size_t per = frames * classes;
  std::vector<CtcResult<T>> parts(batch, CtcResult<T>{T{0}, Tensor<T>(), false});
  // exceptions must not escape the parallel region
  std::vector<std::string> errors(batch);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t b = 0; b < batch; ++b) {
    try {
      const std::size_t t = lengths.empty() ? frames : lengths[b];
      Tensor<T> one({t, classes}, std::vector<T>(logits.ptr() + b * per, logits.ptr() + b * per + t * classes));
      parts[b] = ctc_loss(one, labels[b], blank);
    } catch (const std::exception& e) {
      errors[b] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw DomainError("ctc_loss_batch: " + e);
  }
  BatchCtcResult<T> out{T{0}, Tensor<T>(logits.shape()), std::vector<bool>(batch), 0};
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    out.feasible[b] = parts[b].feasible;
    if (!parts[b].feasible) continue;
    ++out.feasible_count;
    total += parts[b].loss;
  }
  if (out.feasible_count == 0) {
    out.mean_loss = std::numeric_limits<T>::infinity();
    return out;
  }
  const T scale = T{1} / static_cast<T>(out.feasible_count);
  for (std::size_t b = 0; b < batch; ++b) {
    if (!parts[b].feasible) continue;
    const std::size_t n = parts[b].grad.size();
    for (std::size_t i = 0; i < n; ++i) out.grad[b * per + i] = parts[b].grad[i] * scale;
  }
  out.mean_loss = static_cast<T>(total / static_cast<double>(out.feasible_count));
  return out;
}

template <typename T>
LabelSequence greedy_decode(std::span<const T> logits, std::size_t frames, std::size_t classes,
                            std::uint32_t blank) {
  if (logits.size() != frames * classes || classes == 0) {
    throw ShapeError("greedy_decode: logit buffer does not match frames x classes");
  }
  LabelSequence out;
  std::uint32_t prev = std::numeric_limits<std::uint32_t>::max();
  for (std::size_t t = 0; t < frames; ++t) {
    const T* row = logits.data() + t * classes;
    const auto best = static_cast<std::uint32_t>(std::max_element(row, row + classes) - row);
    if (best != prev && best != blank) out.push_back(best);
    prev = best;
  }
  return out;
}

std::u32string reverse_labels(std::u32string_view s) { return std::u32string(s.rbegin(), s.rend()); }

std::string reverse_labels_utf8(std::string_view s) {
  return utf8::encode(reverse_labels(utf8::decode(s)));
}

template CtcResult<float> ctc_loss(const Tensor<float>&, std::span<const std::uint32_t>, std::uint32_t);
template CtcResult<double> ctc_loss(const Tensor<double>&, std::span<const std::uint32_t>,
                                    std::uint32_t);
template BatchCtcResult<float> ctc_loss_batch(const Tensor<float>&, const std::vector<LabelSequence>&,
                                              std::uint32_t, std::span<const std::size_t>);
template BatchCtcResult<double> ctc_loss_batch(const Tensor<double>&, const std::vector<LabelSequence>&,
                                               std::uint32_t, std::span<const std::size_t>);
template LabelSequence greedy_decode(std::span<const float>, std::size_t, std::size_t, std::uint32_t);
template LabelSequence greedy_decode(std::span<const double>, std::size_t, std::size_t,
                                     std::uint32_t);

}  // namespace htr::ctc
