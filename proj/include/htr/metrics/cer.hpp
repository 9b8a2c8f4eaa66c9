#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace htr::metrics {

/// Levenshtein distance with unit costs, over code points.
std::size_t edit_distance(std::u32string_view a, std::u32string_view b);
/// UTF-8 convenience overload.
std::size_t edit_distance_utf8(std::string_view a, std::string_view b);

struct LineCer {
  std::size_t edits = 0;
  std::size_t ref_chars = 0;
};

struct CerReport {
  std::size_t total_edits = 0;
  std::size_t total_ref_chars = 0;
  double cer = 0.0;            // pooled, percent
  double mean_line_cer = 0.0;  // mean over lines with a non-empty reference, percent
  std::vector<LineCer> lines;
};

struct TextPair {
  std::u32string ref;
  std::u32string hyp;
};

/// Pooled corpus CER (sum of edits over sum of reference lengths). Throws
/// std::invalid_argument when every reference is empty.
CerReport corpus_cer(const std::vector<TextPair>& pairs);

/// Multi-script minus single-script CER; negative means the auxiliary data helped.
double delta_cer(double cer_multi, double cer_single);

}  // namespace htr::metrics
