#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "htr/model/model.hpp"
#include "htr/synth/render.hpp"
#include "htr/synth/script.hpp"
#include "htr/train/trainer.hpp"

namespace htr::exp {

/// A dataset is either a manifest directory on disk or one of the generated scripts.
struct DatasetSource {
  std::string name;
  std::filesystem::path path;  // manifest directory, relative to the config file
  std::string synthetic;       // script name ("script_a", ...) when generated
  bool is_synthetic() const { return !synthetic.empty(); }
};

/// Spec fields that replace the preset values; unset fields keep the preset.
struct ModelOverride {
  std::optional<std::array<std::size_t, 3>> channels;
  std::optional<std::array<std::size_t, 3>> blocks;
  std::optional<std::size_t> lstm_layers;
  std::optional<std::size_t> lstm_hidden;
  std::optional<nn::ColumnPoolMode> column_pool;
};

struct SynthSettings {
  synth::ScriptSuiteConfig scripts;
  synth::StyleConfig style;
  std::size_t lines = 2000;  // per script, before the train/val/test split
  std::uint64_t seed = 11;
};

struct ExperimentConfig {
  std::vector<DatasetSource> datasets;
  std::vector<std::string> targets;
  /// Auxiliary datasets per target, in order; J=2 uses the first two. Targets without
  /// an entry use every other dataset.
  std::map<std::string, std::vector<std::string>> aux;
  std::vector<std::string> models{"cnn", "cnn-expand", "crnn"};
  std::vector<std::size_t> k{100, 500, 1000};
  std::vector<std::size_t> j{0, 2};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Keyed by preset name, or "all" for every preset (preset keys win).
  std::map<std::string, ModelOverride> model_overrides;
  train::TrainConfig train;
  SynthSettings synth;
  std::filesystem::path out = "results";
  std::size_t parallelism = 1;
  std::filesystem::path base_dir;  // directory of the config file

  /// Throws ConfigError on unknown names, empty lists or out-of-range values.
  void validate() const;
  const DatasetSource& source(const std::string& name) const;
  std::vector<std::string> aux_for(const std::string& target) const;
  /// Every dataset whose characters enter the vocabulary for `target`.
  std::vector<std::string> participants(const std::string& target) const;
  model::ModelSpec model_spec(const std::string& preset, std::size_t vocab_size) const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// The full published matrix over the three generated scripts, 20,000 steps.
ExperimentConfig default_config();
ExperimentConfig parse_config(const std::string& yaml, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Command-line values that replace config entries.
struct Overrides {
  std::optional<std::string> target;
  std::optional<std::vector<std::string>> aux;
  std::optional<std::string> model;
  std::optional<std::size_t> k;
  std::optional<std::size_t> j;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::optional<std::filesystem::path> out;
};
void apply_overrides(ExperimentConfig& cfg, const Overrides& o);

/// One (target, model, K, J, seed) training run.
struct Cell {
  std::string target;
  std::string model;
  std::size_t k = 0;
  std::size_t j = 0;
  std::uint64_t seed = 0;
  bool operator==(const Cell&) const = default;
};

/// Cells in matrix order: target, model, K, seed, then J.
std::vector<Cell> enumerate_cells(const ExperimentConfig& cfg);

/// Canonical description of everything that determines a cell's result: datasets and
/// their content, model spec, mixture, training, preprocessing and augmentation.
std::string cell_description(const ExperimentConfig& cfg, const Cell& cell);
/// 16 hex digits of FNV-1a over cell_description.
std::string cell_hash(const ExperimentConfig& cfg, const Cell& cell);

}  // namespace htr::exp
