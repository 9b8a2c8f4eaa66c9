#include "htr/metrics/cer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "htr/core/errors.hpp"
#include "htr/core/utf8.hpp"

namespace htr::metrics {

std::size_t edit_distance(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t edit_distance_utf8(std::string_view a, std::string_view b) {
  return edit_distance(utf8::decode(a), utf8::decode(b));
}

CerReport corpus_cer(const std::vector<TextPair>& pairs) {
  CerReport r;
  r.lines.reserve(pairs.size());
  double line_sum = 0.0;
  std::size_t line_count = 0;
  for (const auto& p : pairs) {
    LineCer l{edit_distance(p.ref, p.hyp), p.ref.size()};
    r.total_edits += l.edits;
    r.total_ref_chars += l.ref_chars;
    if (l.ref_chars > 0) {
      line_sum += 100.0 * static_cast<double>(l.edits) / static_cast<double>(l.ref_chars);
      ++line_count;
    }
    r.lines.push_back(l);
  }
  if (r.total_ref_chars == 0) throw std::invalid_argument("corpus_cer: every reference is empty");
  r.cer = 100.0 * static_cast<double>(r.total_edits) / static_cast<double>(r.total_ref_chars);
  r.mean_line_cer = line_sum / static_cast<double>(line_count);
  return r;
}

double delta_cer(double cer_multi, double cer_single) {
  if (!std::isfinite(cer_multi) || !std::isfinite(cer_single)) {
    throw DomainError("delta_cer needs finite CER values");
  }
  return cer_multi - cer_single;
}

}  // namespace htr::metrics
