#include "htr/data/mixture.hpp"

#include <algorithm>
#include <cstdio>

#include "htr/core/errors.hpp"
#include "htr/core/hash.hpp"

namespace htr::data {
namespace {

constexpr std::uint64_t kSubsetStream = 0x5355425345545f4bULL;
constexpr std::uint64_t kSamplerStream = 0x53414d504c455253ULL;

}  // namespace

std::vector<std::size_t> select_k_subset(const Dataset& target, std::size_t k, std::uint64_t seed) {
  const auto train = target.split_indices(Split::train);
  if (k > train.size()) {
    throw ConfigError("K=" + std::to_string(k) + " exceeds the " + std::to_string(train.size()) +
                      " training lines of " + target.name());
  }
  RngStream rng(seed, kSubsetStream);
  const auto perm = rng_permutation(rng, train.size());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = train[perm[i]];
  return out;
}

std::string subset_hash(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  std::vector<std::string> ids;
  ids.reserve(indices.size());
  for (auto i : indices) ids.push_back(dataset[i].id);
  std::sort(ids.begin(), ids.end());
  std::uint64_t h = fnv1a("");
  for (const auto& id : ids) h = fnv1a("\n", fnv1a(id, h));
  return hex64(h);
}

TrainingSet build_mixture(const MixtureSpec& spec) {
  if (!spec.target) throw ConfigError("mixture has no target dataset");
  TrainingSet out;
  const auto subset = select_k_subset(*spec.target, spec.k, spec.seed);
  out.subset_hash = subset_hash(*spec.target, subset);
  for (auto i : subset) out.items.push_back({spec.target, i});
  out.target_count = subset.size();
  for (const auto* aux : spec.aux) {
    if (!aux) throw ConfigError("mixture references a missing auxiliary dataset");
    if (aux == spec.target) throw ConfigError("auxiliary dataset " + aux->name() + " is the target");
    const auto train = aux->split_indices(Split::train);
    if (train.empty()) throw ConfigError("auxiliary dataset " + aux->name() + " has no train split");
    for (auto i : train) out.items.push_back({aux, i});
  }
  return out;
}

EpochSampler::EpochSampler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {
  if (n == 0) throw ConfigError("cannot sample from an empty training set");
}

std::vector<std::size_t> EpochSampler::next(std::size_t count) {
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    if (cursor_ == order_.size()) {
      RngStream rng = RngStream(seed_, kSamplerStream).derive(epoch_++);
      order_ = rng_permutation(rng, n_);
      cursor_ = 0;
    }
    out.push_back(order_[cursor_++]);
  }
  drawn_ += count;
  return out;
}

}  // namespace htr::data
