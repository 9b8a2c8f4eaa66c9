#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "htr/core/errors.hpp"
#include "htr/core/rng.hpp"
#include "htr/core/utf8.hpp"
#include "htr/data/augment.hpp"
#include "htr/data/batch.hpp"
#include "htr/data/dataset.hpp"
#include "htr/data/mixture.hpp"
#include "htr/data/preprocess.hpp"
#include "htr/data/vocab.hpp"
#include "htr/synth/script.hpp"

using namespace htr;
using namespace htr::data;

namespace {

GrayImage noise_image(std::size_t h, std::size_t w, std::uint64_t seed, int lo = 0, int hi = 256) {
  RngStream rng(seed, 1);
  GrayImage img(h, w);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(lo + rng.uniform_below(hi - lo));
  return img;
}

// Train-split dataset of `n` text-only samples named <prefix>NNNN.
Dataset text_dataset(const std::string& name, std::size_t n, const std::string& prefix) {
  std::vector<LineSample> samples;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "%s%05zu", prefix.c_str(), i);
    samples.push_back({id, "x.png", "ab", "xx", Split::train});
  }
  return Dataset(name, {}, samples);
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_SUITE("data") {

TEST_CASE("preprocess examples") {
  const PreprocessConfig cfg;
  CHECK(preprocess(GrayImage(220, 2900, 200), cfg).shape() == Shape{1, 110, 1578});
  CHECK(preprocess(GrayImage(55, 400, 200), cfg).shape() == Shape{1, 110, 928});
  CHECK(preprocess(GrayImage(110, 1450, 200), cfg).shape() == Shape{1, 110, 1578});
  CHECK(scaled_size(220, 2900).width == 1450);
  CHECK(scaled_size(55, 400).width == 800);
  CHECK(scaled_size(110, 3000).width == 1450);
}

TEST_CASE("preprocess over random shapes") {
  RngStream rng(1, 1);
  const PreprocessConfig cfg;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t h = 1 + rng.uniform_below(400), w = 1 + rng.uniform_below(4000);
    const auto s = scaled_size(h, w, cfg);
    CHECK(s.height == 110);
    CHECK(s.width + 2 * cfg.pad <= 1578);
    const double exact = double(w) * 110.0 / double(h);
    if (exact < 1450.0 && exact >= 1.0) CHECK(std::abs(double(s.width) - exact) <= 1.0);
    if (exact > 1450.0) CHECK(s.width == 1450);
  }
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 1 + rng.uniform_below(200), w = 1 + rng.uniform_below(2000);
    const TensorF t = preprocess(noise_image(h, w, trial), cfg);
    CHECK(t.dim(1) == 110);
    CHECK(t.dim(2) <= 1578);
    for (auto v : t.data()) CHECK((v >= 0.f && v <= 1.f));
  }
  CHECK_THROWS_AS(scaled_size(0, 10), DataError);
}

TEST_CASE("padding uses the border median and keeps content centered") {
  GrayImage img(110, 10, 250);
  img.at(50, 5) = 0;
  CHECK(border_median(img) == 250);
  const PreprocessConfig cfg{110, 1450, 4};
  const auto p = preprocess_image(img, cfg);
  CHECK(p.background == 250);
  CHECK(p.image.width == 18);
  CHECK(p.image.at(50, 0) == 250);
  CHECK(p.image.at(50, 9) == 0);
}

TEST_CASE("augmentation") {
  const GrayImage img = noise_image(40, 120, 3, 60, 200);
  RngStream a(9, 1);
  CHECK(augment(img, a, AugmentConfig::disabled()) == img);
  AugmentConfig always;
  always.p_affine = always.p_distort = always.p_morph = always.p_photometric = 1.0;
  CHECK(augment(img, a, always) != img);
  RngStream c(10, 1), d(10, 1);
  const GrayImage u = augment(img, c), v = augment(img, d);
  CHECK(u == v);
  CHECK(u.height == img.height);
  CHECK(u.width == img.width);

  const GrayImage shifted = adjust_brightness_contrast(adjust_brightness_contrast(img, 0.1, 1.0), -0.1, 1.0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(std::abs(int(shifted.pixels[i]) - int(img.pixels[i])) <= 1);
}

TEST_CASE("vocabulary") {
  const Vocabulary v = build_vocab({"ab"});
  CHECK(v.chars() == U"ab");
  CHECK(v.blank_id() == 2);
  CHECK(v.encode(U"ba") == ctc::LabelSequence{1, 0});
  CHECK(v.decode({0, 1, 1}) == U"abb");
  CHECK_THROWS_AS(v.encode(U"abc"), DataError);
  CHECK(build_vocab({"xay", "b"}) == build_vocab({"b", "xay"}));
  CHECK(Vocabulary::parse(v.serialize()) == v);
  CHECK_THROWS_AS(build_vocab({""}), DataError);

  std::vector<std::string> texts;
  for (const auto& s : synth::default_scripts()) texts.push_back(utf8::encode(s.glyphs));
  const Vocabulary all = build_vocab(texts);
  CHECK(all.size() == 43);
  CHECK(all.chars() == synth::glyph_inventory());
  CHECK(Vocabulary::parse(all.serialize()) == all);
}

TEST_CASE("manifest round trip and dataset loading") {
  TempDir tmp("htr_manifest_test");
  std::vector<LineSample> samples{{"b2", "images/b2.png", "\xd8\xa8 \xd8\xaa", "fa", Split::val},
                                  {"a1", "images/a1.png", "x", "ur", Split::train},
                                  {"c3", "images/c3.png", "", "ar", Split::test}};
  std::filesystem::create_directories(tmp.path / "images");
  for (std::size_t i = 0; i < samples.size(); ++i)
    save_image(tmp.path / samples[i].image_path, noise_image(12, 20 + i, i));
  write_manifest(tmp.path / kManifestName, samples);
  const auto back = read_manifest(tmp.path / kManifestName);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == samples[i].id);
    CHECK(back[i].text == samples[i].text);
    CHECK(back[i].split == samples[i].split);
    CHECK(back[i].image_path == samples[i].image_path);
  }
  const Dataset ds = load_dataset(tmp.path);
  CHECK(ds.name() == "htr_manifest_test");
  CHECK(ds.split_indices(Split::train) == std::vector<std::size_t>{1});
  CHECK(ds.image(2) == noise_image(12, 22, 2));
  CHECK_THROWS_AS(load_dataset(tmp.path / "missing"), DataError);
}

TEST_CASE("k subsets") {
  const Dataset ds = text_dataset("t", 300, "t");
  const auto full = select_k_subset(ds, 300, 4);
  CHECK(std::set<std::size_t>(full.begin(), full.end()).size() == 300);
  CHECK(select_k_subset(ds, 50, 4) == select_k_subset(ds, 50, 4));
  CHECK(select_k_subset(ds, 50, 4) != select_k_subset(ds, 50, 5));
  CHECK_THROWS_AS(select_k_subset(ds, 301, 4), ConfigError);
  RngStream rng(7, 7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::uint64_t seed = rng.next_u64();
    const auto small = select_k_subset(ds, 40, seed), large = select_k_subset(ds, 170, seed);
    const std::set<std::size_t> big(large.begin(), large.end());
    for (auto i : small) CHECK(big.contains(i));
  }
  CHECK(subset_hash(ds, {1, 2}) == subset_hash(ds, {2, 1}));
  CHECK(subset_hash(ds, {1, 2}) != subset_hash(ds, {1, 3}));
  CHECK(subset_hash(ds, {1, 2}).size() == 16);
}

TEST_CASE("mixtures") {
  const Dataset target = text_dataset("t", 400, "t");
  const Dataset a = text_dataset("a", 5000, "a"), b = text_dataset("b", 1473, "b");
  const TrainingSet single = build_mixture({&target, 100, {}, 1});
  CHECK(single.items.size() == 100);
  CHECK(single.target_count == 100);
  const TrainingSet multi = build_mixture({&target, 100, {&a, &b}, 1});
  CHECK(multi.items.size() == 100 + 5000 + 1473);
  CHECK(multi.subset_hash == single.subset_hash);
  const auto subset = select_k_subset(target, 100, 1);
  const std::set<std::size_t> chosen(subset.begin(), subset.end());
  for (const auto& item : multi.items) {
    if (item.dataset == &target) CHECK(chosen.contains(item.index));
  }
}

TEST_CASE("epoch sampler visits every item once per epoch") {
  EpochSampler s(7, 3);
  for (int epoch = 0; epoch < 3; ++epoch) {
    auto draw = s.next(7);
    std::sort(draw.begin(), draw.end());
    CHECK(draw == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  }
  CHECK(s.drawn() == 21);
  EpochSampler t(7, 3);
  EpochSampler u(7, 3);
  CHECK(t.next(20) == u.next(20));
}

TEST_CASE("batch assembly") {
  std::vector<LineSample> samples{{"s0", "a.png", "ab", "xx", Split::train}, {"s1", "b.png", "bba", "xx", Split::train}};
  Dataset ds("d", {}, samples);
  ds.set_image(0, GrayImage(20, 30, 255));
  ds.set_image(1, GrayImage(20, 70, 100));
  const Vocabulary vocab = build_vocab({"ab"});
  BatchOptions opts;
  opts.preprocess = {40, 200, 5};
  const Batch b = assemble_batch({{&ds, 0}, {&ds, 1}}, vocab, opts);
  CHECK(b.images.shape() == Shape{2, 1, 40, 150});
  CHECK(b.widths == std::vector<std::size_t>{70, 150});
  CHECK(b.texts == std::vector<std::u32string>{U"ab", U"bba"});
  CHECK(b.labels == std::vector<ctc::LabelSequence>{{1, 0}, {0, 1, 1}});
  // the narrow sample is padded with its own background
  CHECK(b.images.at(0, 0, 20, 149) == 1.0f);
  CHECK(b.images.at(1, 0, 20, 149) == doctest::Approx(100.0 / 255.0));
  opts.reverse_labels = false;
  CHECK(assemble_batch({{&ds, 1}}, vocab, opts).labels[0] == ctc::LabelSequence{1, 1, 0});
}

}
