// Experiment runner: synthetic data generation, the run matrix, and its reports.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>
#include <set>

#include "htr/core/alloc.hpp"
#include "htr/core/errors.hpp"
#include "htr/exp/config.hpp"
#include "htr/exp/results.hpp"
#include "htr/exp/runner.hpp"
#include "htr/model/model.hpp"
#include "htr/synth/corpus.hpp"

namespace {

using namespace htr;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kCellsFailed = 2;

struct Flags {
  std::string config;
  std::string target;
  std::vector<std::string> aux;
  std::string model;
  std::optional<std::size_t> k;
  std::optional<std::size_t> j;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::string out;
  std::size_t vocab = 43;
  bool verbose = false;
};

void add_matrix_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "experiment config (YAML)")->check(CLI::ExistingFile);
  cmd->add_option("--target", f.target, "target dataset name");
  cmd->add_option("--aux", f.aux, "auxiliary datasets, comma separated")->delimiter(',');
  cmd->add_option("--model", f.model, "model preset")->check(CLI::IsMember({"cnn", "cnn-expand", "crnn"}));
  cmd->add_option("--k", f.k, "target subset size");
  cmd->add_option("--j", f.j, "auxiliary dataset count")->check(CLI::IsMember({0, 2}));
  cmd->add_option("--seed", f.seed, "seed");
  cmd->add_option("--steps", f.steps, "training steps per cell");
  cmd->add_option("--out", f.out, "output directory");
}

exp::ExperimentConfig resolve_config(const Flags& f) {
  auto cfg = f.config.empty() ? exp::default_config() : exp::load_config(f.config);
  exp::Overrides o;
  if (!f.target.empty()) o.target = f.target;
  if (!f.aux.empty()) o.aux = f.aux;
  if (!f.model.empty()) o.model = f.model;
  o.k = f.k;
  o.j = f.j;
  o.seed = f.seed;
  o.steps = f.steps;
  if (!f.out.empty()) o.out = f.out;
  exp::apply_overrides(cfg, o);
  return cfg;
}

int gen_synth(const Flags& f) {
  auto cfg = resolve_config(f);
  std::vector<synth::SyntheticScript> scripts = synth::default_scripts(cfg.synth.scripts);
  std::cout << synth::overlap_report(scripts).format();
  for (const auto& d : cfg.datasets) {
    if (!d.is_synthetic()) continue;
    const auto lines = exp::generate_synthetic(cfg.synth, d.synthetic);
    const auto dir = cfg.out / "corpus" / d.name;
    synth::write_corpus(dir, lines);
    std::cout << d.name << ": " << lines.size() << " lines -> " << dir.string() << '\n';
  }
  return kOk;
}

int run(const Flags& f) {
  const auto cfg = resolve_config(f);
  const auto outcome = exp::run_matrix(cfg);
  std::cout << "cells: " << outcome.table.rows.size() << " (ran " << outcome.executed << ", reused "
            << outcome.skipped << ", failed " << outcome.failed << "); paired ΔCER rows: " << outcome.deltas.size()
            << '\n';
  if (!outcome.deltas.empty()) std::cout << exp::report_table2(outcome.table, cfg.models).format();
  std::cout << "results: " << exp::results_path(cfg).string() << '\n';
  return outcome.all_ok() ? kOk : kCellsFailed;
}

exp::ResultsTable load_results(const exp::ExperimentConfig& cfg) {
  const auto path = exp::results_path(cfg);
  if (!std::filesystem::exists(path)) throw ConfigError("no results at " + path.string());
  return exp::read_results(path);
}

int report(const Flags& f) {
  const auto cfg = resolve_config(f);
  std::cout << exp::report_table2(load_results(cfg)).format();
  return kOk;
}

int plotdata(const Flags& f) {
  const auto cfg = resolve_config(f);
  const auto table = load_results(cfg);
  std::set<std::string> datasets(cfg.targets.begin(), cfg.targets.end());
  std::set<std::string> models(cfg.models.begin(), cfg.models.end());
  for (const auto& r : table.rows) {
    datasets.insert(r.dataset);
    models.insert(r.model);
  }
  for (const auto& p : exp::emit_plotdata(table, cfg.out / "plotdata", {datasets.begin(), datasets.end()},
                                          {models.begin(), models.end()})) {
    std::cout << p.string() << '\n';
  }
  return kOk;
}

int count_params(const Flags& f) {
  std::size_t cnn = 0, crnn = 0;
  for (const std::string name : {"cnn", "cnn-expand", "crnn"}) {
    const auto spec = model::ModelSpec::preset(name, f.vocab);
    const auto n = model::expected_param_count(spec);
    if (name == "cnn") cnn = n;
    if (name == "crnn") crnn = n;
    std::cout << name << '\t' << n << '\n';
  }
  std::cout << "crnn - cnn\t" << crnn - cnn << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  htr::tune_allocator();
  CLI::App app{"Multi-script handwriting recognition experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags flags;
  app.add_flag("-v,--verbose", flags.verbose, "debug logging");

  auto* gen = app.add_subcommand("gen-synth", "write the synthetic script corpora and print their overlap");
  add_matrix_flags(gen, flags);
  auto* run_cmd = app.add_subcommand("run", "run every missing cell of the experiment matrix");
  add_matrix_flags(run_cmd, flags);
  auto* rep = app.add_subcommand("report", "print the ΔCER table from the results file");
  add_matrix_flags(rep, flags);
  auto* plot = app.add_subcommand("plotdata", "write per-dataset, per-model CER series");
  add_matrix_flags(plot, flags);
  auto* count = app.add_subcommand("count-params", "print parameter counts of the three presets");
  count->add_option("--vocab", flags.vocab, "vocabulary size (blank excluded)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }
  spdlog::set_level(flags.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*gen) return gen_synth(flags);
    if (*run_cmd) return run(flags);
    if (*rep) return report(flags);
    if (*plot) return plotdata(flags);
    return count_params(flags);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kConfigError;
  }
}
