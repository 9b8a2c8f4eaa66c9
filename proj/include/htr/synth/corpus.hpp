#pragma once

#include <filesystem>
#include <vector>

#include "htr/data/dataset.hpp"
#include "htr/synth/render.hpp"
#include "htr/synth/script.hpp"

namespace htr::synth {

struct GeneratedLine {
  data::LineSample sample;
  data::GrayImage image;
};

/// Split by FNV-1a of the id: 8 of 10 buckets train, one val, one test.
data::Split split_for_id(std::string_view id);

/// `n_lines` lines of `script`; line i uses streams derived from (seed, i) only, so
/// the corpus is identical for any thread count. Image paths are "images/<id>.png".
std::vector<GeneratedLine> generate_corpus(const SyntheticScript& script, std::size_t n_lines, std::uint64_t seed,
                                           const StyleConfig& style = {});

/// Writes images and manifest under `dir` (created if needed).
void write_corpus(const std::filesystem::path& dir, const std::vector<GeneratedLine>& lines);

/// In-memory dataset over generated lines, no files involved.
data::Dataset to_dataset(const std::string& name, const std::vector<GeneratedLine>& lines);

/// Largest label length L with 2L+1 <= frames.
std::size_t max_feasible_length(std::size_t frames);

}  // namespace htr::synth
