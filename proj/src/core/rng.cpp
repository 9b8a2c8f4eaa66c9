#include "htr/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace htr {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t position)
    : seed_(seed),
      stream_id_(stream_id),
      key_(splitmix64(splitmix64(seed) ^ (stream_id * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull))),
      position_(position) {}

std::uint64_t RngStream::next_u64() noexcept {
  // Two mixing rounds over (key, counter); SplitMix64 alone is a counter-based generator.
  const std::uint64_t c = position_++;
  return splitmix64(key_ ^ splitmix64(c * 0x9E3779B97F4A7C15ull));
}

double RngStream::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_below(std::uint64_t n) noexcept {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r < limit) return r % n;
  }
}

double RngStream::normal() noexcept {
  // Box-Muller; consumes two counters per draw.
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::derive(std::uint64_t child) const noexcept {
  return RngStream(splitmix64(key_ ^ 0x5851F42D4C957F2Dull), child);
}

template <typename T>
Tensor<T> rng_normal(RngStream& stream, Shape shape, T mean, T stddev) {
  if (!(stddev >= T{0})) throw DomainError("rng_normal: stddev must be >= 0");
  Tensor<T> out(std::move(shape));
  for (auto& v : out.data()) v = mean + stddev * static_cast<T>(stream.normal());
  return out;
}

template <typename T>
Tensor<T> rng_uniform(RngStream& stream, Shape shape, T lo, T hi) {
  if (!(hi >= lo)) throw DomainError("rng_uniform: empty interval");
  Tensor<T> out(std::move(shape));
  for (auto& v : out.data()) v = static_cast<T>(stream.uniform(lo, hi));
  return out;
}

std::vector<std::size_t> rng_permutation(RngStream& stream, std::size_t n) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(stream.uniform_below(i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

template Tensor<float> rng_normal(RngStream&, Shape, float, float);
template Tensor<double> rng_normal(RngStream&, Shape, double, double);
template Tensor<float> rng_uniform(RngStream&, Shape, float, float);
template Tensor<double> rng_uniform(RngStream&, Shape, double, double);

}  // namespace htr
