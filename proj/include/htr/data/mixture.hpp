#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "htr/core/rng.hpp"
#include "htr/data/dataset.hpp"

namespace htr::data {

/// Reference to one sample of one dataset.
struct SampleRef {
  const Dataset* dataset = nullptr;
  std::size_t index = 0;

  const LineSample& sample() const { return (*dataset)[index]; }
  bool operator==(const SampleRef&) const = default;
};

/// K train-split samples of `target` drawn without replacement. The train split is
/// ordered by id and shuffled by `seed`; the first K of that order are taken, so
/// subsets for growing K are nested. Throws ConfigError when K exceeds the split.
std::vector<std::size_t> select_k_subset(const Dataset& target, std::size_t k, std::uint64_t seed);

/// FNV-1a over the sorted sample ids, as 16 hex digits.
std::string subset_hash(const Dataset& dataset, const std::vector<std::size_t>& indices);

struct MixtureSpec {
  const Dataset* target = nullptr;
  std::size_t k = 0;
  std::vector<const Dataset*> aux;
  std::uint64_t seed = 0;
};

struct TrainingSet {
  std::vector<SampleRef> items;  // K-subset first, then each auxiliary train split
  std::string subset_hash;       // of the target K-subset only
  std::size_t target_count = 0;
};

/// Plain union of the target K-subset and every auxiliary train split.
TrainingSet build_mixture(const MixtureSpec& spec);

/// Endless stream of sample positions: each epoch is a fresh permutation of [0, n).
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed);
  std::vector<std::size_t> next(std::size_t count);
  std::uint64_t drawn() const noexcept { return drawn_; }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::uint64_t drawn_ = 0;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace htr::data
