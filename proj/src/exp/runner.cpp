#include "htr/exp/runner.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "htr/core/errors.hpp"
#include "htr/core/hash.hpp"
#include "htr/core/utf8.hpp"
#include "htr/ctc/ctc.hpp"
#include "htr/data/mixture.hpp"
#include "htr/data/preprocess.hpp"

namespace htr::exp {
namespace {

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw DataError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::optional<train::RunRecord> read_record(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return train::RunRecord::from_json(ss.str());
  } catch (const DataError& e) {
    spdlog::warn("ignoring unreadable run record {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

ResultRow row_for(const Cell& cell, const train::RunRecord& rec) {
  return ResultRow{cell.target,      cell.model,       cell.k,      cell.j,     cell.seed,
                   rec.test_cer,     rec.best_val_cer, rec.params,  rec.steps,  rec.status,
                   rec.subset_hash,  rec.config_hash};
}

/// Samples whose label cannot fit the frames of their padded image.
std::size_t count_infeasible(const data::Dataset& ds, const data::PreprocessConfig& pre) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds[i].split == data::Split::test) continue;
    const auto& img = ds.image(i);
    const auto size = data::scaled_size(img.height, img.width, pre);
    const auto text = utf8::decode(ds[i].text);
    const std::vector<std::uint32_t> ids(text.begin(), text.end());
    if (ctc::min_frames(ids) > model::output_frames(size.width + 2 * pre.pad)) ++bad;
  }
  return bad;
}

}  // namespace

std::vector<synth::GeneratedLine> generate_synthetic(const SynthSettings& settings, const std::string& script) {
  for (const auto& s : synth::default_scripts(settings.scripts)) {
    if (s.name == script) return synth::generate_corpus(s, settings.lines, splitmix64(settings.seed ^ fnv1a(script)),
                                                        settings.style);
  }
  throw ConfigError("unknown synthetic script '" + script + "'");
}

void DatasetPool::prepare(const std::vector<std::string>& names) {
  for (const auto& name : names) {
    if (datasets_.contains(name)) continue;
    const auto& src = cfg_.source(name);
    std::unique_ptr<data::Dataset> ds;
    if (src.is_synthetic()) {
      spdlog::info("generating synthetic dataset {} ({} lines)", name, cfg_.synth.lines);
      ds = std::make_unique<data::Dataset>(synth::to_dataset(name, generate_synthetic(cfg_.synth, src.synthetic)));
    } else {
      ds = std::make_unique<data::Dataset>(data::load_dataset(cfg_.resolve(src.path), name));
      ds->preload();
    }
    if (const auto bad = count_infeasible(*ds, cfg_.train.preprocess)) {
      spdlog::warn("{}: {} train/val lines have more characters than their image has frames", name, bad);
    }
    datasets_.emplace(name, std::move(ds));
  }
}

const data::Dataset& DatasetPool::get(const std::string& name) const {
  const auto it = datasets_.find(name);
  if (it == datasets_.end()) throw ConfigError("dataset '" + name + "' was not prepared");
  return *it->second;
}

const data::Vocabulary& DatasetPool::vocabulary(const std::string& target) {
  if (auto it = vocabs_.find(target); it != vocabs_.end()) return it->second;
  std::vector<std::string> texts;
  for (const auto& name : cfg_.participants(target)) {
    const auto t = get(name).texts(data::Split::train);
    texts.insert(texts.end(), t.begin(), t.end());
  }
  return vocabs_.emplace(target, data::build_vocab(texts)).first->second;
}

std::filesystem::path results_path(const ExperimentConfig& cfg) { return cfg.out / "results.csv"; }

std::filesystem::path record_path(const ExperimentConfig& cfg, const std::string& hash, std::uint64_t seed) {
  return cfg.out / "runs" / (train::run_file_stem(hash, seed) + ".json");
}

MatrixOutcome run_matrix(const ExperimentConfig& cfg, const MatrixOptions& options) {
  cfg.validate();
  const auto cells = enumerate_cells(cfg);

  DatasetPool pool(cfg);
  std::set<std::string> needed;
  for (const auto& t : cfg.targets) {
    for (const auto& p : cfg.participants(t)) needed.insert(p);
  }
  pool.prepare({needed.begin(), needed.end()});
  for (const auto& t : cfg.targets) {
    const auto available = pool.get(t).split_indices(data::Split::train).size();
    for (auto k : cfg.k) {
      if (k > available) {
        throw ConfigError("K=" + std::to_string(k) + " exceeds the " + std::to_string(available) +
                          " training lines of '" + t + "'");
      }
    }
    if (pool.get(t).split_indices(data::Split::val).empty()) throw ConfigError("'" + t + "' has no validation lines");
    pool.vocabulary(t);
  }

  std::filesystem::create_directories(cfg.out / "runs");
  ResultsWriter writer(results_path(cfg));
  std::set<std::string> in_csv;
  for (const auto& r : read_results(writer.path()).rows) in_csv.insert(r.cell_hash);

  std::vector<std::string> hashes;
  std::vector<std::optional<ResultRow>> rows(cells.size());
  std::vector<std::size_t> pending;
  MatrixOutcome outcome;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    hashes.push_back(cell_hash(cfg, cells[i]));
    if (auto rec = read_record(record_path(cfg, hashes[i], cells[i].seed))) {
      rows[i] = row_for(cells[i], *rec);
      if (!in_csv.contains(hashes[i])) writer.append(*rows[i]);
      ++outcome.skipped;
    } else {
      pending.push_back(i);
    }
  }
  spdlog::info("matrix: {} cells, {} already complete, {} to run", cells.size(), outcome.skipped, pending.size());

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr interrupted;
  auto run_cell = [&](std::size_t i) {
    const Cell& cell = cells[i];
    if (options.before_cell) options.before_cell(cell);
    const auto& target = pool.get(cell.target);
    std::vector<const data::Dataset*> aux;
    auto names = cfg.aux_for(cell.target);
    for (std::size_t a = 0; a < cell.j; ++a) aux.push_back(&pool.get(names[a]));
    const auto& vocab = pool.vocabulary(cell.target);

    train::RunRecord rec;
    try {
      const auto mixture = data::build_mixture({&target, cell.k, aux, cell.seed});
      train::RunInputs in{&mixture, &target, &vocab, cfg.model_spec(cell.model, vocab.size()),
                          cfg.train, cell.seed, hashes[i]};
      train::RunHooks hooks;
      hooks.checkpoint_dir = cfg.out / "runs";
      if (options.on_step) hooks.on_step = [&](std::size_t step) { options.on_step(cell, step); };
      rec = train::run_training(in, hooks);
    } catch (const Interrupted&) {
      throw;
    } catch (const std::exception& e) {
      rec.config_hash = hashes[i];
      rec.seed = cell.seed;
      rec.status = "failed";
      rec.failure = e.what();
      rec.test_cer = rec.best_val_cer = rec.test_mean_line_cer = std::numeric_limits<double>::quiet_NaN();
    }
    write_atomic(record_path(cfg, hashes[i], cell.seed), rec.to_json());
    const auto row = row_for(cell, rec);
    std::lock_guard lock(mu);
    writer.append(row);
    rows[i] = row;
    ++outcome.executed;
    if (rec.ok()) {
      spdlog::info("[{}] {} {} K={} J={} seed={}: test CER {:.2f} (best val {:.2f} at step {})", hashes[i],
                   cell.target, cell.model, cell.k, cell.j, cell.seed, rec.test_cer, rec.best_val_cer, rec.best_step);
    } else {
      spdlog::error("[{}] {} {} K={} J={} seed={} failed: {}", hashes[i], cell.target, cell.model, cell.k, cell.j,
                    cell.seed, rec.failure);
    }
  };
  auto worker = [&] {
    while (!stop) {
      const std::size_t n = next++;
      if (n >= pending.size()) return;
      try {
        run_cell(pending[n]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!interrupted) interrupted = std::current_exception();
        stop = true;
      }
    }
  };
  const std::size_t lanes = std::min(cfg.parallelism, std::max<std::size_t>(1, pending.size()));
  if (lanes <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < lanes; ++t) threads.emplace_back(worker);
  }
  if (interrupted) std::rethrow_exception(interrupted);

  for (auto& r : rows) {
    outcome.table.rows.push_back(*r);
    if (!r->ok()) ++outcome.failed;
  }
  outcome.deltas = pair_deltas(outcome.table);
  return outcome;
}

}  // namespace htr::exp
