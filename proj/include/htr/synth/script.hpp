#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "htr/core/rng.hpp"

namespace htr::synth {

/// An artificial script: a glyph subset of a shared inventory plus a first-order
/// Markov chain over it and a line-length distribution.
struct SyntheticScript {
  std::string name;
  std::u32string glyphs;       // code points, in chain index order
  std::vector<double> initial;  // start distribution, size n
  std::vector<double> bigram;   // n x n row-stochastic, row = previous glyph
  double mean_len = 7.0;
  double std_len = 2.0;
  std::size_t min_len = 1;
  std::size_t max_len = 12;

  std::size_t size() const { return glyphs.size(); }
  double transition(std::size_t from, std::size_t to) const { return bigram[from * glyphs.size() + to]; }
  /// Throws ConfigError unless rows sum to 1 (1e-9), glyphs are unique and lengths are sane.
  void validate() const;
};

/// Draws one line of text (display order) from the chain.
std::u32string sample_text(const SyntheticScript& script, RngStream& rng);

struct ScriptSuiteConfig {
  std::uint64_t seed = 7;
  /// Weight of the script-specific chain against the chain shared by all scripts.
  double specific_weight = 0.3;
  /// Each row of a chain puts `favored_mass` on `favored` successors, the rest uniformly.
  std::size_t favored = 4;
  double favored_mass = 0.8;
  double mean_len = 7.0;
  double std_len = 2.0;
  std::size_t max_len = 12;
};

/// The three default scripts ("script_a", "script_b", "script_c") over the 43-glyph
/// inventory, with the overlap pattern 28 shared by all, 5 by b and c, 1 by a and b,
/// 1 by a and c, and 1 / 0 / 7 exclusive glyphs.
std::vector<SyntheticScript> default_scripts(const ScriptSuiteConfig& cfg = {});

/// The full 43-glyph inventory, sorted by code point.
std::u32string glyph_inventory();

/// Count of glyphs per membership pattern. Pattern bit i is set when script i uses the glyph.
struct OverlapReport {
  std::vector<std::string> scripts;
  std::map<std::uint32_t, std::size_t> counts;

  std::size_t count(std::uint32_t pattern) const {
    auto it = counts.find(pattern);
    return it == counts.end() ? 0 : it->second;
  }
  std::size_t shared_by_all() const { return count((1u << scripts.size()) - 1); }
  /// Plain-text table, one row per non-empty pattern.
  std::string format() const;
};

OverlapReport overlap_report(const std::vector<SyntheticScript>& scripts);

}  // namespace htr::synth
