#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "htr/data/batch.hpp"
#include "htr/metrics/cer.hpp"
#include "htr/model/model.hpp"
#include "htr/train/optim.hpp"

namespace htr::train {

struct TrainConfig {
  std::size_t total_steps = 2000;
  std::size_t batch_size = 16;
  std::size_t eval_interval = 0;  // 0 means total_steps / 40 (at least 1)
  std::size_t eval_batch_size = 16;
  double base_lr = 5e-4;
  std::vector<double> milestones{0.5, 0.75};
  double lr_gamma = 0.1;
  AdamWConfig adamw;
  double clip_norm = 5.0;  // <= 0 disables clipping
  bool reverse_labels = true;
  data::PreprocessConfig preprocess;
  data::AugmentConfig augment;
  bool augment_enabled = true;
  double divergence_cer = 99.0;     // percent
  double divergence_grace = 0.5;    // fraction of total_steps before divergence counts

  std::size_t effective_eval_interval() const;
  Schedule schedule() const;
};

struct EvalPoint {
  std::size_t step = 0;
  double val_cer = 0.0;
  double train_loss = 0.0;  // mean over the steps since the previous evaluation; 0 at step 0
  bool operator==(const EvalPoint&) const = default;
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string model_spec;
  std::string subset_hash;
  std::size_t params = 0;
  std::size_t steps = 0;  // optimizer steps actually taken
  std::vector<EvalPoint> evals;
  std::size_t best_step = 0;
  double best_val_cer = 0.0;
  double test_cer = 0.0;
  double test_mean_line_cer = 0.0;
  std::string checkpoint;  // file name of the best checkpoint, if persisted
  std::string status = "ok";
  std::string failure;

  bool ok() const { return status == "ok"; }
  std::string to_json() const;
  static RunRecord from_json(std::string_view text);
  bool operator==(const RunRecord&) const = default;
};

/// Records which split each evaluation read, in order. Lets tests prove that model
/// selection never touched test data.
class SplitAudit {
 public:
  enum class Phase { selection, final_test };
  struct Event {
    Phase phase;
    data::Split split;
    std::size_t step;
  };
  void record(Phase phase, data::Split split, std::size_t step) { events_.push_back({phase, split, step}); }
  const std::vector<Event>& events() const noexcept { return events_; }

 private:
  std::vector<Event> events_;
};

struct RunInputs {
  const data::TrainingSet* train = nullptr;
  const data::Dataset* target = nullptr;  // validation and test splits come from here only
  const data::Vocabulary* vocab = nullptr;
  model::ModelSpec spec;
  TrainConfig config;
  std::uint64_t seed = 0;
  std::string config_hash;
};

struct RunHooks {
  /// Directory for "<hash>-s<seed>.ckpt"; empty disables checkpoint persistence.
  std::filesystem::path checkpoint_dir;
  SplitAudit* audit = nullptr;
  /// Called after every optimizer step with the step count; may throw to abort.
  std::function<void(std::size_t)> on_step;
};

/// Greedy-decodes every sample of `indices` in eval mode and scores display-order text.
metrics::CerReport evaluate(model::Model<float>& model, const data::Dataset& dataset,
                            const std::vector<std::size_t>& indices, const data::Vocabulary& vocab,
                            const TrainConfig& cfg);

/// Full training run: seeded init, fixed step budget, periodic target-validation CER,
/// best-checkpoint selection (earliest step on ties), one final test evaluation.
RunRecord run_training(const RunInputs& in, const RunHooks& hooks = {});

/// "<hash>-s<seed>", shared by the checkpoint and the run record files.
std::string run_file_stem(const std::string& config_hash, std::uint64_t seed);

/// Frames the model emits for each padded width in a batch.
std::vector<std::size_t> frames_for_widths(const std::vector<std::size_t>& widths);

}  // namespace htr::train
