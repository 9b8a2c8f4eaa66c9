#pragma once

#include <string>

#include "htr/core/rng.hpp"
#include "htr/data/image.hpp"

namespace htr::synth {

/// Per-line handwriting style. Everything that varies between lines lives here; the
/// glyph programs themselves are fixed.
struct RenderStyle {
  std::size_t height = 64;
  double scale = 1.0;        // glyph size multiplier
  double slant = 0.0;        // horizontal shear per unit of height
  int thickness = 2;         // stroke width in pixels
  double jitter = 0.04;      // point noise, in x-height units
  double wobble = 0.06;      // per-glyph baseline offset, in x-height units
  double dot_dropout = 0.0;  // probability that a glyph's dots are omitted
  std::uint8_t ink = 30;
  std::uint8_t paper = 225;
  std::uint64_t seed = 0;    // drives connector lengths, jitter and dropout
};

struct StyleConfig {
  std::size_t height = 64;
  double scale_min = 0.9, scale_max = 1.1;
  double slant_max = 0.15;
  int thickness_min = 1, thickness_max = 2;
  double jitter = 0.04;
  double wobble = 0.06;
  double dot_dropout = 0.1;
};

RenderStyle sample_style(RngStream& rng, const StyleConfig& cfg = {});

/// Draws `text` right to left: the first character sits at the right margin and the
/// glyphs are joined along a common baseline. Deterministic in (text, style).
data::GrayImage render_line(std::u32string_view text, const RenderStyle& style);

/// True when the renderer has a stroke program for `c`.
bool has_glyph(char32_t c);

}  // namespace htr::synth
