#include "htr/train/trainer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "htr/core/errors.hpp"
#include "htr/ctc/ctc.hpp"
#include "htr/model/checkpoint.hpp"

namespace htr::train {
namespace {

constexpr std::uint64_t kInitStream = 0x494e4954ULL;
constexpr std::uint64_t kAugmentStream = 0x4155474dULL;

// JSON has no NaN; failed runs store their missing CERs as null.
double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

std::size_t TrainConfig::effective_eval_interval() const {
  if (eval_interval > 0) return eval_interval;
  return std::max<std::size_t>(1, total_steps / 40);
}

Schedule TrainConfig::schedule() const { return Schedule{total_steps, base_lr, milestones, lr_gamma}; }

std::string run_file_stem(const std::string& config_hash, std::uint64_t seed) {
  return config_hash + "-s" + std::to_string(seed);
}

std::vector<std::size_t> frames_for_widths(const std::vector<std::size_t>& widths) {
  std::vector<std::size_t> out;
  out.reserve(widths.size());
  for (auto w : widths) out.push_back(model::output_frames(w));
  return out;
}

std::string RunRecord::to_json() const {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["model_spec"] = model_spec;
  j["subset_hash"] = subset_hash;
  j["params"] = params;
  j["steps"] = steps;
  auto& ev = j["evals"] = nlohmann::ordered_json::array();
  for (const auto& e : evals) ev.push_back({{"step", e.step}, {"val_cer", e.val_cer}, {"train_loss", e.train_loss}});
  j["best_step"] = best_step;
  j["best_val_cer"] = best_val_cer;
  j["test_cer"] = test_cer;
  j["test_mean_line_cer"] = test_mean_line_cer;
  j["checkpoint"] = checkpoint;
  j["status"] = status;
  j["failure"] = failure;
  return j.dump(2) + "\n";
}

RunRecord RunRecord::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RunRecord r;
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.model_spec = j.at("model_spec").get<std::string>();
    r.subset_hash = j.at("subset_hash").get<std::string>();
    r.params = j.at("params").get<std::size_t>();
    r.steps = j.at("steps").get<std::size_t>();
    for (const auto& e : j.at("evals")) {
      r.evals.push_back({e.at("step").get<std::size_t>(), e.at("val_cer").get<double>(),
                         e.at("train_loss").get<double>()});
    }
    r.best_step = j.at("best_step").get<std::size_t>();
    r.best_val_cer = number_or_nan(j.at("best_val_cer"));
    r.test_cer = number_or_nan(j.at("test_cer"));
    r.test_mean_line_cer = number_or_nan(j.at("test_mean_line_cer"));
    r.checkpoint = j.at("checkpoint").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.failure = j.at("failure").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run record: ") + e.what());
  }
}

metrics::CerReport evaluate(model::Model<float>& model, const data::Dataset& dataset,
                            const std::vector<std::size_t>& indices, const data::Vocabulary& vocab,
                            const TrainConfig& cfg) {
  if (indices.empty()) throw DataError("evaluation split of " + dataset.name() + " is empty");
  // group similar widths so little of each batch is padding
  std::vector<std::size_t> order = indices;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return dataset.image(a).width * dataset.image(b).height < dataset.image(b).width * dataset.image(a).height;
  });
  data::BatchOptions opts;
  opts.preprocess = cfg.preprocess;
  opts.reverse_labels = cfg.reverse_labels;
  opts.encode_labels = false;
  const std::size_t classes = model.spec().classes();
  const std::uint32_t blank = model.spec().blank();
  std::vector<metrics::TextPair> pairs;
  pairs.reserve(order.size());
  const std::size_t bs = std::max<std::size_t>(1, cfg.eval_batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    std::vector<data::SampleRef> refs;
    for (std::size_t i = start; i < std::min(order.size(), start + bs); ++i) refs.push_back({&dataset, order[i]});
    const auto batch = data::assemble_batch(refs, vocab, opts);
    const auto logits = model.forward(batch.images, nn::Mode::eval);
    const std::size_t frames = logits.dim(1);
    const auto valid = frames_for_widths(batch.widths);
    for (std::size_t b = 0; b < refs.size(); ++b) {
      const float* row = logits.ptr() + b * frames * classes;
      const std::size_t t = std::min(valid[b], frames);
      const auto ids = ctc::greedy_decode<float>(std::span<const float>(row, t * classes), t, classes, blank);
      auto hyp = vocab.decode(ids);
      if (cfg.reverse_labels) hyp = ctc::reverse_labels(hyp);
      pairs.push_back({batch.texts[b], std::move(hyp)});
    }
  }
  return metrics::corpus_cer(pairs);
}

RunRecord run_training(const RunInputs& in, const RunHooks& hooks) {
  if (!in.train || !in.target || !in.vocab) throw ConfigError("run_training: missing inputs");
  const TrainConfig& cfg = in.config;
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
  auto spec = in.spec;
  spec.vocab_size = in.vocab->size();
  spec.input_height = cfg.preprocess.height;
  spec.validate();

  RunRecord rec;
  rec.config_hash = in.config_hash;
  rec.seed = in.seed;
  rec.model_spec = spec.serialize();
  rec.subset_hash = in.train->subset_hash;

  RngStream init_rng(in.seed, kInitStream);
  model::Model<float> model(spec, init_rng);
  rec.params = model.count_params();
  AdamW<float> optimizer(model.params(), cfg.adamw);
  const Schedule schedule = cfg.schedule();
  data::EpochSampler sampler(in.train->items.size(), in.seed);

  const auto val_idx = in.target->split_indices(data::Split::val);
  const auto test_idx = in.target->split_indices(data::Split::test);
  const std::size_t interval = cfg.effective_eval_interval();

  std::vector<Tensor<float>> best_snapshot = model.params().snapshot();
  double best = std::numeric_limits<double>::infinity();
  double loss_sum = 0.0;
  std::size_t loss_count = 0;

  auto run_eval = [&](std::size_t step) {
    if (hooks.audit) hooks.audit->record(SplitAudit::Phase::selection, data::Split::val, step);
    const auto report = evaluate(model, *in.target, val_idx, *in.vocab, cfg);
    const double train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    rec.evals.push_back({step, report.cer, train_loss});
    loss_sum = 0.0;
    loss_count = 0;
    if (report.cer < best) {
      best = report.cer;
      rec.best_step = step;
      rec.best_val_cer = report.cer;
      best_snapshot = model.params().snapshot();
    }
    spdlog::debug("[{} seed {}] step {} val CER {:.2f} loss {:.4f}", in.config_hash, in.seed, step, report.cer,
                  train_loss);
    if (cfg.divergence_grace < 1.0 &&
        static_cast<double>(step) > cfg.divergence_grace * static_cast<double>(cfg.total_steps) &&
        report.cer > cfg.divergence_cer) {
      rec.status = "failed";
      rec.failure = "diverged: validation CER " + std::to_string(report.cer) + "% at step " + std::to_string(step);
    }
  };

  data::BatchOptions opts;
  opts.preprocess = cfg.preprocess;
  opts.reverse_labels = cfg.reverse_labels;
  if (cfg.augment_enabled) {
    opts.augment = cfg.augment;
    opts.augment_base = RngStream(in.seed, kAugmentStream);
  }

  run_eval(0);
  for (std::size_t step = 0; step < cfg.total_steps && rec.ok(); ++step) {
    opts.first_draw = sampler.drawn();
    std::vector<data::SampleRef> refs;
    for (auto i : sampler.next(cfg.batch_size)) refs.push_back(in.train->items[i]);
    const auto batch = data::assemble_batch(refs, *in.vocab, opts);

    const auto logits = model.forward(batch.images, nn::Mode::train);
    const auto frames = frames_for_widths(batch.widths);
    const auto ctc = ctc::ctc_loss_batch(logits, batch.labels, spec.blank(), frames);
    if (ctc.feasible_count < refs.size()) {
      spdlog::warn("step {}: {} of {} samples too long for their frame count", step,
                   refs.size() - ctc.feasible_count, refs.size());
    }
    if (ctc.feasible_count > 0) {
      model.backward(ctc.grad);
      if (cfg.clip_norm > 0) clip_grad_norm(model.params(), cfg.clip_norm);
      try {
        optimizer.step(schedule.lr(step));
      } catch (const NumericError& e) {
        rec.status = "failed";
        rec.failure = std::string("numeric failure at step ") + std::to_string(step) + ": " + e.what();
        break;
      }
      loss_sum += ctc.mean_loss;
      ++loss_count;
    } else {
      model.params().zero_grad();
    }
    rec.steps = step + 1;
    if (hooks.on_step) hooks.on_step(rec.steps);
    if (rec.steps % interval == 0 || rec.steps == cfg.total_steps) run_eval(rec.steps);
  }

  model.params().restore(best_snapshot);
  if (hooks.audit) hooks.audit->record(SplitAudit::Phase::final_test, data::Split::test, rec.steps);
  if (!test_idx.empty()) {
    const auto report = evaluate(model, *in.target, test_idx, *in.vocab, cfg);
    rec.test_cer = report.cer;
    rec.test_mean_line_cer = report.mean_line_cer;
  } else if (rec.ok()) {
    rec.status = "failed";
    rec.failure = "target dataset has no test split";
  }
  if (!hooks.checkpoint_dir.empty()) {
    std::filesystem::create_directories(hooks.checkpoint_dir);
    rec.checkpoint = run_file_stem(in.config_hash, in.seed) + ".ckpt";
    model::save_checkpoint(hooks.checkpoint_dir / rec.checkpoint, model, in.seed);
  }
  return rec;
}

}  // namespace htr::train
