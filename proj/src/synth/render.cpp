#include "htr/synth/render.hpp"

#include <array>
#include <cmath>
#include <map>
#include <opencv2/imgproc.hpp>
#include <vector>

#include "htr/core/errors.hpp"

namespace htr::synth {
namespace {

struct Pt {
  double u, v;  // u: 0..width left to right, v: height above the baseline (x-height units)
};
using Stroke = std::vector<Pt>;

struct Skeleton {
  double width;
  std::vector<Stroke> strokes;
  bool joins_next = true;  // false for letters that never connect to the following one
};

enum class Sk {
  alef, beh, jeem, dal, reh, seen, sad, tah, ain, feh, qaf, lam, meem, noon, heh, waw, yeh, kaf, gaf,
  hamza, heh_doachashmee
};
enum class Place { above, below };
enum class Mark { none, toe, hamza_above, hamza_below, inner_stroke };

struct GlyphSpec {
  Sk skeleton;
  int dots = 0;
  Place place = Place::above;
  Mark mark = Mark::none;
};

const Skeleton& skeleton(Sk s) {
  static const std::map<Sk, Skeleton> table{
      {Sk::alef, {0.4, {{{0.2, 0}, {0.2, 2.2}}}, false}},
      {Sk::beh, {1.6, {{{1.6, 0.6}, {1.45, 0.05}, {0.8, 0}, {0.15, 0.05}, {0, 0.5}}}}},
      {Sk::jeem, {1.4, {{{1.4, 0.9}, {0.4, 0.9}, {1.0, 0.5}, {0.6, -0.2}, {0.2, -0.9}, {0.7, -1.3}, {1.3, -1.0}}}}},
      {Sk::dal, {0.9, {{{0.2, 1.0}, {0.8, 0.4}, {0.8, 0}, {0, 0}}}, false}},
      {Sk::reh, {0.9, {{{0.8, 0.5}, {0.7, 0}, {0.4, -0.6}, {0, -0.9}}}, false}},
      {Sk::seen,
       {1.8, {{{1.8, 0.6}, {1.7, 0}, {1.4, 0}, {1.3, 0.5}, {1.2, 0}, {0.9, 0}, {0.8, 0.5}, {0.7, 0}, {0.3, 0}, {0, 0.3}}}}},
      {Sk::sad, {1.9, {{{1.9, 0}, {1.4, 0}, {1.1, 0.5}, {0.5, 0.6}, {0.3, 0.2}, {0.6, 0}, {0, 0}}}}},
      {Sk::tah, {1.5, {{{1.5, 0}, {1.2, 0.5}, {0.6, 0.6}, {0.3, 0.2}, {0.6, 0}, {0, 0}}, {{1.0, 0.5}, {1.1, 2.0}}}}},
      {Sk::ain, {1.0, {{{0.9, 1.1}, {0.5, 1.3}, {0.3, 0.9}, {0.7, 0.5}, {0.2, 0}, {0.1, -0.7}, {0.6, -1.1}, {1.0, -0.9}}}}},
      {Sk::feh, {1.5, {{{1.5, 0}, {0.3, 0}, {0.2, 0.3}, {0.5, 0.7}, {0.8, 0.4}, {0.4, 0.1}}}}},
      {Sk::qaf, {1.4, {{{1.4, 0.6}, {1.1, 0.9}, {0.9, 0.5}, {1.2, 0.2}, {1.3, -0.3}, {0.7, -0.8}, {0.1, -0.4}, {0, 0.2}}}}},
      {Sk::lam, {1.2, {{{1.0, 2.3}, {1.0, 0}, {0.7, -0.6}, {0.2, -0.5}, {0, 0.1}}}}},
      {Sk::meem, {0.9, {{{0.9, 0}, {0.6, 0.1}, {0.4, 0.5}, {0.1, 0.3}, {0.3, 0}, {0.3, -1.0}}}}},
      {Sk::noon, {1.2, {{{1.2, 0.6}, {1.1, -0.2}, {0.6, -0.6}, {0.1, -0.3}, {0, 0.4}}}}},
      {Sk::heh, {1.0, {{{1.0, 0.3}, {0.7, 0.8}, {0.2, 0.6}, {0.1, 0.1}, {0.6, 0}, {1.0, 0.3}}}}},
      {Sk::waw, {1.0, {{{0.9, 0.2}, {0.6, 0.7}, {0.3, 0.4}, {0.6, 0.1}, {0.6, -0.3}, {0, -0.9}}}, false}},
      {Sk::yeh, {1.6, {{{1.6, 0.5}, {1.2, 0.1}, {1.5, -0.4}, {0.8, -0.7}, {0.1, -0.5}, {0, 0.1}}}}},
      {Sk::kaf, {1.3, {{{0.5, 2.0}, {1.2, 1.3}, {1.2, 0}, {0, 0}, {0, 0.4}}}}},
      {Sk::gaf, {1.3, {{{0.5, 2.0}, {1.2, 1.3}, {1.2, 0}, {0, 0}, {0, 0.4}}, {{0.6, 2.45}, {1.3, 1.75}}}}},
      {Sk::hamza, {0.6, {{{0.6, 0.8}, {0.2, 0.9}, {0.2, 0.5}, {0.5, 0.5}, {0, 0.2}}}, false}},
      {Sk::heh_doachashmee,
       {1.2, {{{1.2, 0}, {0.2, 0}, {0.1, 0.5}, {0.5, 0.8}, {0.8, 0.4}, {0.4, 0.2}, {0.6, 0.6}, {0.3, 0.7}}}}},
  };
  return table.at(s);
}

const std::map<char32_t, GlyphSpec>& glyph_table() {
  using P = Place;
  static const std::map<char32_t, GlyphSpec> table{
      {U'ا', {Sk::alef}},
      {U'ب', {Sk::beh, 1, P::below}},
      {U'ت', {Sk::beh, 2, P::above}},
      {U'ث', {Sk::beh, 3, P::above}},
      {U'ج', {Sk::jeem, 1, P::below}},
      {U'ح', {Sk::jeem}},
      {U'خ', {Sk::jeem, 1, P::above}},
      {U'د', {Sk::dal}},
      {U'ذ', {Sk::dal, 1, P::above}},
      {U'ر', {Sk::reh}},
      {U'ز', {Sk::reh, 1, P::above}},
      {U'س', {Sk::seen}},
      {U'ش', {Sk::seen, 3, P::above}},
      {U'ص', {Sk::sad}},
      {U'ض', {Sk::sad, 1, P::above}},
      {U'ط', {Sk::tah}},
      {U'ظ', {Sk::tah, 1, P::above}},
      {U'ع', {Sk::ain}},
      {U'غ', {Sk::ain, 1, P::above}},
      {U'ف', {Sk::feh, 1, P::above}},
      {U'ق', {Sk::qaf, 2, P::above}},
      {U'ل', {Sk::lam}},
      {U'م', {Sk::meem}},
      {U'ن', {Sk::noon, 1, P::above}},
      {U'ه', {Sk::heh}},
      {U'و', {Sk::waw}},
      {U'ى', {Sk::yeh}},
      {U'ي', {Sk::yeh, 2, P::below}},
      {U'گ', {Sk::gaf}},
      {U'پ', {Sk::beh, 3, P::below}},
      {U'چ', {Sk::jeem, 3, P::below}},
      {U'ژ', {Sk::reh, 3, P::above}},
      {U'ک', {Sk::kaf}},
      {U'ك', {Sk::kaf, 0, P::above, Mark::inner_stroke}},
      {U'ء', {Sk::hamza}},
      {U'ٹ', {Sk::beh, 0, P::above, Mark::toe}},
      {U'ڈ', {Sk::dal, 0, P::above, Mark::toe}},
      {U'ڑ', {Sk::reh, 0, P::above, Mark::toe}},
      {U'ں', {Sk::noon}},
      {U'ۂ', {Sk::heh, 0, P::above, Mark::hamza_above}},
      {U'ھ', {Sk::heh_doachashmee}},
      {U'ڤ', {Sk::feh, 3, P::above}},
      {U'إ', {Sk::alef, 0, P::above, Mark::hamza_below}},
  };
  return table;
}

double lowest_v(const Skeleton& s) {
  double lo = 0.0;
  for (const auto& st : s.strokes)
    for (const auto& p : st) lo = std::min(lo, p.v);
  return lo;
}

double highest_v(const Skeleton& s) {
  double hi = 0.0;
  for (const auto& st : s.strokes)
    for (const auto& p : st) hi = std::max(hi, p.v);
  return hi;
}

std::vector<Stroke> mark_strokes(Mark m, const Skeleton& s) {
  const double mid = s.width / 2;
  const double top = highest_v(s);
  switch (m) {
    case Mark::none: return {};
    case Mark::toe:
      return {{{mid + 0.15, top + 0.35}, {mid - 0.15, top + 0.35}, {mid - 0.1, top + 0.55}, {mid + 0.1, top + 0.5}},
              {{mid + 0.1, top + 0.35}, {mid + 0.15, top + 0.85}}};
    case Mark::hamza_above:
      return {{{mid + 0.2, top + 0.5}, {mid - 0.05, top + 0.55}, {mid, top + 0.35}, {mid - 0.2, top + 0.25}}};
    case Mark::hamza_below: {
      const double lo = lowest_v(s);
      return {{{mid + 0.2, lo - 0.3}, {mid - 0.05, lo - 0.25}, {mid, lo - 0.45}, {mid - 0.2, lo - 0.55}}};
    }
    case Mark::inner_stroke: return {{{0.8, 0.55}, {0.45, 0.7}, {0.5, 0.4}, {0.3, 0.45}}};
  }
  return {};
}

}  // namespace

bool has_glyph(char32_t c) { return glyph_table().contains(c); }

RenderStyle sample_style(RngStream& rng, const StyleConfig& cfg) {
  RenderStyle s;
  s.height = cfg.height;
  s.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  s.slant = rng.uniform(-cfg.slant_max, cfg.slant_max);
  s.thickness = cfg.thickness_min +
                static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(cfg.thickness_max - cfg.thickness_min + 1)));
  s.jitter = cfg.jitter;
  s.wobble = cfg.wobble;
  s.dot_dropout = cfg.dot_dropout;
  s.ink = static_cast<std::uint8_t>(10 + rng.uniform_below(50));
  s.paper = static_cast<std::uint8_t>(190 + rng.uniform_below(56));
  s.seed = rng.next_u64();
  return s;
}

data::GrayImage render_line(std::u32string_view text, const RenderStyle& style) {
  const double x_height = 0.2 * static_cast<double>(style.height) * style.scale;
  const double baseline = 0.62 * static_cast<double>(style.height);
  const double margin = 0.5 * x_height;
  RngStream rng(style.seed, 0x52454e444552ULL);

  // layout pass: advance widths and connector lengths, drawn in text order so a
  // longer text only ever appends to the layout of its prefix
  struct Placed {
    const GlyphSpec* spec;
    double right;   // x of the glyph's right edge
    double width;   // pixels
    double lift;    // baseline offset in pixels
    bool drop_dots;
  };
  std::vector<Placed> placed;
  double cursor = 0.0;  // distance from the right margin
  for (std::size_t i = 0; i < text.size(); ++i) {
    auto it = glyph_table().find(text[i]);
    if (it == glyph_table().end()) {
      throw DomainError("no stroke program for character U+" + std::to_string(static_cast<std::uint32_t>(text[i])));
    }
    const Skeleton& sk = skeleton(it->second.skeleton);
    const double w = sk.width * x_height;
    const double lift = style.wobble * x_height * rng.normal();
    const bool drop = rng.bernoulli(style.dot_dropout);
    placed.push_back({&it->second, cursor, w, lift, drop});
    const double gap = (sk.joins_next ? rng.uniform(0.15, 0.5) : rng.uniform(0.35, 0.6)) * x_height;
    cursor += w + gap;
  }
  const auto width = static_cast<std::size_t>(std::ceil(cursor + 2 * margin));
  cv::Mat canvas(static_cast<int>(style.height), static_cast<int>(std::max<std::size_t>(width, 1)), CV_8UC1,
                 cv::Scalar(style.paper));
  const double right_edge = static_cast<double>(canvas.cols) - margin;

  auto to_px = [&](const Placed& g, const Pt& p, double noise_u, double noise_v) {
    const double left = right_edge - g.right - g.width;
    const double y_local = (p.v + noise_v) * x_height + g.lift;
    const double x = left + (p.u + noise_u) * x_height + style.slant * y_local;
    const double y = baseline - y_local;
    return cv::Point(static_cast<int>(std::lround(x * 16)), static_cast<int>(std::lround(y * 16)));
  };
  const cv::Scalar ink(style.ink);
  constexpr int kShift = 4;  // sub-pixel coordinates (1/16 px)

  for (std::size_t i = 0; i < placed.size(); ++i) {
    const auto& g = placed[i];
    const Skeleton& sk = skeleton(g.spec->skeleton);
    auto strokes = sk.strokes;
    for (auto& s : mark_strokes(g.spec->mark, sk)) strokes.push_back(s);
    for (const auto& stroke : strokes) {
      std::vector<cv::Point> pts;
      for (const auto& p : stroke) {
        pts.push_back(to_px(g, p, style.jitter * rng.normal(), style.jitter * rng.normal()));
      }
      cv::polylines(canvas, pts, false, ink, style.thickness, cv::LINE_AA, kShift);
    }
    if (g.spec->dots > 0 && !g.drop_dots) {
      const double v = g.spec->place == Place::above ? std::max(highest_v(sk), 0.6) + 0.45 : lowest_v(sk) - 0.45;
      const double spacing = 0.28;
      const int n = g.spec->dots;
      for (int d = 0; d < n; ++d) {
        // three dots form a small triangle, as in handwriting
        double du = (d - (std::min(n, 2) - 1) / 2.0) * spacing;
        double dv = 0.0;
        if (n == 3) {
          du = d == 2 ? 0.0 : (d - 0.5) * spacing;
          dv = d == 2 ? (g.spec->place == Place::above ? 0.25 : -0.25) : 0.0;
        }
        const Pt c{sk.width / 2 + du, v + dv};
        const int radius = std::max(1, style.thickness) * 16;
        cv::circle(canvas, to_px(g, c, 0.0, 0.0), radius, ink, cv::FILLED, cv::LINE_AA, kShift);
      }
    }
    // baseline connector to the next glyph on the left
    if (i + 1 < placed.size() && sk.joins_next) {
      const auto& next = placed[i + 1];
      const Pt a{0.0, 0.0}, b{next.width / x_height, 0.0};
      std::vector<cv::Point> join{to_px(g, a, 0, 0), to_px(next, b, 0, 0)};
      cv::polylines(canvas, join, false, ink, style.thickness, cv::LINE_AA, kShift);
    }
  }
  data::GrayImage out(static_cast<std::size_t>(canvas.rows), static_cast<std::size_t>(canvas.cols));
  for (int y = 0; y < canvas.rows; ++y) {
    const auto* row = canvas.ptr<std::uint8_t>(y);
    std::copy(row, row + canvas.cols, out.pixels.data() + static_cast<std::size_t>(y) * out.width);
  }
  return out;
}

}  // namespace htr::synth
