#pragma once

#include <functional>
#include <map>
#include <memory>
#include <stdexcept>

#include "htr/data/dataset.hpp"
#include "htr/data/vocab.hpp"
#include "htr/exp/config.hpp"
#include "htr/exp/results.hpp"
#include "htr/synth/corpus.hpp"

namespace htr::exp {

/// Thrown from a hook to stop a matrix run; finished cells stay recorded.
struct Interrupted : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Lines of one generated script under the configured synthesis settings.
std::vector<synth::GeneratedLine> generate_synthetic(const SynthSettings& settings, const std::string& script);

/// Datasets of a config, loaded from disk or generated, with images in memory.
class DatasetPool {
 public:
  explicit DatasetPool(const ExperimentConfig& cfg) : cfg_(cfg) {}
  /// Loads every named dataset; call before sharing the pool across threads.
  void prepare(const std::vector<std::string>& names);
  const data::Dataset& get(const std::string& name) const;
  /// Union vocabulary over the training texts of the target's participants.
  const data::Vocabulary& vocabulary(const std::string& target);

 private:
  const ExperimentConfig& cfg_;
  std::map<std::string, std::unique_ptr<data::Dataset>> datasets_;
  std::map<std::string, data::Vocabulary> vocabs_;
};

struct MatrixOptions {
  /// Called before a cell is trained; may throw Interrupted.
  std::function<void(const Cell&)> before_cell;
  /// Called after every optimizer step of every cell; may throw Interrupted.
  std::function<void(const Cell&, std::size_t)> on_step;
};

struct MatrixOutcome {
  ResultsTable table;  // rows of this config's cells, in matrix order
  std::vector<DeltaRow> deltas;
  std::size_t executed = 0;  // cells trained by this invocation
  std::size_t skipped = 0;   // cells found complete in the output directory
  std::size_t failed = 0;    // cells whose record status is not ok
  bool all_ok() const { return failed == 0; }
};

/// Runs every cell of the matrix that has no record in `cfg.out`. Writes
/// runs/<hash>-s<seed>.json (and .ckpt) per cell and appends to results.csv.
MatrixOutcome run_matrix(const ExperimentConfig& cfg, const MatrixOptions& options = {});

std::filesystem::path results_path(const ExperimentConfig& cfg);
std::filesystem::path record_path(const ExperimentConfig& cfg, const std::string& hash, std::uint64_t seed);

}  // namespace htr::exp
