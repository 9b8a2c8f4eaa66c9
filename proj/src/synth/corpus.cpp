#include "htr/synth/corpus.hpp"

#include <cstdio>

#include "htr/core/errors.hpp"
#include "htr/core/hash.hpp"
#include "htr/core/utf8.hpp"

namespace htr::synth {
namespace {

constexpr std::uint64_t kTextStream = 0x54455854ULL;
constexpr std::uint64_t kStyleStream = 0x5354594c45ULL;

}  // namespace

data::Split split_for_id(std::string_view id) {
  const auto bucket = fnv1a(id) % 10;
  if (bucket < 8) return data::Split::train;
  return bucket == 8 ? data::Split::val : data::Split::test;
}

std::vector<GeneratedLine> generate_corpus(const SyntheticScript& script, std::size_t n_lines, std::uint64_t seed,
                                           const StyleConfig& style) {
  if (n_lines == 0) throw ConfigError("generate_corpus needs at least one line");
  script.validate();
  for (char32_t g : script.glyphs) {
    if (!has_glyph(g)) throw ConfigError("script " + script.name + " uses a glyph the renderer cannot draw");
  }
  std::vector<GeneratedLine> out(n_lines);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < n_lines; ++i) {
    RngStream text_rng = RngStream(seed, kTextStream).derive(i);
    RngStream style_rng = RngStream(seed, kStyleStream).derive(i);
    const auto text = sample_text(script, text_rng);
    const auto st = sample_style(style_rng, style);
    char id[64];
    std::snprintf(id, sizeof id, "%s-%06zu", script.name.c_str(), i);
    auto& line = out[i];
    line.sample.id = id;
    line.sample.image_path = std::filesystem::path("images") / (line.sample.id + ".png");
    line.sample.text = utf8::encode(text);
    line.sample.language = script.name;
    line.sample.split = split_for_id(line.sample.id);
    line.image = render_line(text, st);
  }
  return out;
}

void write_corpus(const std::filesystem::path& dir, const std::vector<GeneratedLine>& lines) {
  std::filesystem::create_directories(dir / "images");
  std::vector<data::LineSample> samples;
  samples.reserve(lines.size());
  for (const auto& l : lines) {
    data::save_image(dir / l.sample.image_path, l.image);
    samples.push_back(l.sample);
  }
  data::write_manifest(dir / data::kManifestName, samples);
}

data::Dataset to_dataset(const std::string& name, const std::vector<GeneratedLine>& lines) {
  std::vector<data::LineSample> samples;
  samples.reserve(lines.size());
  for (const auto& l : lines) samples.push_back(l.sample);
  data::Dataset ds(name, {}, std::move(samples));
  for (std::size_t i = 0; i < lines.size(); ++i) ds.set_image(i, lines[i].image);
  return ds;
}

std::size_t max_feasible_length(std::size_t frames) { return frames == 0 ? 0 : (frames - 1) / 2; }

}  // namespace htr::synth
