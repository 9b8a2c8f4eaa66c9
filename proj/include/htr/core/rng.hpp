#pragma once

#include <cstdint>
#include <vector>

#include "htr/core/tensor.hpp"

namespace htr {

/// Counter-based random stream. Output n is a pure function of (seed, stream_id, n),
/// so streams can be split across workers and repositioned without replaying history.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t position = 0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }
  std::uint64_t position() const noexcept { return position_; }
  void seek(std::uint64_t position) noexcept { position_ = position; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). Unbiased (rejection); n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n) noexcept;
  double normal() noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Child stream keyed by this stream's identity and `child`; does not advance this stream.
  RngStream derive(std::uint64_t child) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t position_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

template <typename T>
Tensor<T> rng_normal(RngStream& stream, Shape shape, T mean, T stddev);

template <typename T>
Tensor<T> rng_uniform(RngStream& stream, Shape shape, T lo, T hi);

/// Fisher-Yates permutation of [0, n) driven by `stream`; identical on every host.
std::vector<std::size_t> rng_permutation(RngStream& stream, std::size_t n);

}  // namespace htr
