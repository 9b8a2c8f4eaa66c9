#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "htr/core/errors.hpp"
#include "htr/exp/config.hpp"
#include "htr/exp/results.hpp"
#include "htr/exp/runner.hpp"

using namespace htr;
using namespace htr::exp;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

// Four tiny cells on one generated target: one model, K=100, J in {0, 2}, two seeds.
const char* kSmall = R"(
datasets:
  - {name: a, synthetic: script_a}
  - {name: b, synthetic: script_b}
  - {name: c, synthetic: script_c}
targets: [a]
aux: {a: [b, c]}
models: [cnn]
k: [100]
j: [0, 2]
seeds: [1, 2]
model_overrides:
  all: {channels: [4, 8, 8], blocks: [1, 1, 1]}
train: {steps: 3, batch_size: 4, eval_interval: 3, eval_batch_size: 32, divergence_grace: 1}
preprocess: {height: 32, max_width: 160, pad: 16}
synth: {lines: 1200, max_len: 8, mean_len: 5, style: {height: 32}}
)";

ResultRow row(const std::string& ds, const std::string& model, std::size_t k, std::size_t j, std::uint64_t seed,
              double cer, const std::string& subset = "s") {
  ResultRow r;
  r.dataset = ds;
  r.model = model;
  r.k = k;
  r.j = j;
  r.seed = seed;
  r.test_cer = cer;
  r.subset_hash = subset + std::to_string(seed);
  r.cell_hash = ds + model + std::to_string(k) + std::to_string(j) + std::to_string(seed);
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("exp") {

TEST_CASE("default config is the full published matrix") {
  const auto cfg = default_config();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.targets.size() == 3);
  CHECK(enumerate_cells(cfg).size() == 3 * 3 * 3 * 2 * 3);
  CHECK(cfg.train.total_steps == 20000);
  CHECK(cfg.train.effective_eval_interval() == 500);
}

TEST_CASE("cell enumeration order and counts") {
  auto cfg = parse_config(kSmall);
  const auto cells = enumerate_cells(cfg);
  REQUIRE(cells.size() == 4);
  CHECK(cells[0] == Cell{"a", "cnn", 100, 0, 1});
  CHECK(cells[1] == Cell{"a", "cnn", 100, 2, 1});
  CHECK(cells[3] == Cell{"a", "cnn", 100, 2, 2});

  apply_overrides(cfg, {{}, {}, {}, {}, 0, 1, {}, {}});
  CHECK(enumerate_cells(cfg).size() == 1);

  const auto micro = load_config(HTR_SOURCE_DIR "/configs/micro.yaml");
  CHECK(enumerate_cells(micro).size() == 54);
  std::size_t singles = 0;
  for (const auto& c : enumerate_cells(micro)) singles += c.j == 0;
  CHECK(singles == 27);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(parse_config("bogus: 1"), ConfigError);
  CHECK_THROWS_AS(parse_config("train: {stepz: 3}"), ConfigError);
  CHECK_THROWS_AS(parse_config("models: [transformer]"), ConfigError);
  CHECK_THROWS_AS(parse_config("j: [1]"), ConfigError);
  CHECK_THROWS_AS(parse_config("k: []"), ConfigError);
  CHECK_THROWS_AS(parse_config("seeds: [1, 1]"), ConfigError);
  CHECK_THROWS_AS(parse_config("targets: [nowhere]"), ConfigError);
  CHECK_THROWS_AS(parse_config("train: {lr: -1}"), ConfigError);
  CHECK_THROWS_AS(parse_config("train: {milestones: [0.75, 0.5]}"), ConfigError);
  CHECK_THROWS_AS(parse_config("augment: {p_affine: 2}"), ConfigError);
  CHECK_THROWS_AS(parse_config("k: [ten]"), ConfigError);
  CHECK_THROWS_AS(parse_config("[unbalanced"), ConfigError);
  CHECK_THROWS_AS(parse_config("datasets: [{name: x, synthetic: script_z}]"), ConfigError);
  CHECK_THROWS_AS(parse_config("datasets: [{name: x, path: d, synthetic: script_a}]"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"(
datasets: [{name: a, synthetic: script_a}, {name: b, synthetic: script_b}]
j: [0, 2])"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config("aux: {script_a: [script_a, script_b]}"), ConfigError);
  CHECK_THROWS_AS(parse_config("model_overrides: {crnn: {lstm_hidden: 0}}"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);
  auto cfg = parse_config(kSmall);
  CHECK_THROWS_AS(apply_overrides(cfg, {{"zzz"}, {}, {}, {}, {}, {}, {}, {}}), ConfigError);
}

TEST_CASE("config parsing and overrides") {
  const auto cfg = parse_config(kSmall, "/base");
  CHECK(cfg.datasets.size() == 3);
  CHECK(cfg.aux_for("a") == std::vector<std::string>{"b", "c"});
  CHECK(cfg.aux_for("b") == std::vector<std::string>{"a", "c"});
  CHECK(cfg.participants("a") == std::vector<std::string>{"a", "b", "c"});
  CHECK(cfg.train.total_steps == 3);
  CHECK(cfg.train.preprocess.height == 32);
  const auto spec = cfg.model_spec("cnn", 10);
  CHECK(spec.channels == std::array<std::size_t, 3>{4, 8, 8});
  CHECK(spec.input_height == 32);
  CHECK(cfg.resolve("x") == std::filesystem::path("/base/x"));
  CHECK(cfg.resolve("/abs") == std::filesystem::path("/abs"));

  // overrides apply to the crnn only where they are meaningful
  const auto micro = load_config(HTR_SOURCE_DIR "/configs/micro.yaml");
  CHECK(micro.model_spec("cnn", 5).lstm_layers == 0);
  CHECK(micro.model_spec("crnn", 5).lstm_hidden == 8);
  CHECK(micro.model_spec("cnn-expand", 5).channels == std::array<std::size_t, 3>{6, 10, 12});

  auto o = cfg;
  apply_overrides(o, {{"a"}, {{"c", "b"}}, {"crnn"}, 50, 2, 7, 11, {"/tmp/o"}});
  CHECK(o.aux_for("a") == std::vector<std::string>{"c", "b"});
  CHECK(enumerate_cells(o) == std::vector<Cell>{{"a", "crnn", 50, 2, 7}});
  CHECK(o.train.total_steps == 11);
  CHECK(o.out == std::filesystem::path("/tmp/o"));
}

TEST_CASE("cell hash covers every result-determining field") {
  const auto base = parse_config(kSmall);
  const Cell cell{"a", "cnn", 100, 2, 1};
  const auto h = cell_hash(base, cell);
  CHECK(h.size() == 16);
  CHECK(cell_hash(parse_config(kSmall), cell) == h);

  std::set<std::string> seen{h};
  auto expect_new = [&](const ExperimentConfig& cfg, const Cell& c) { CHECK(seen.insert(cell_hash(cfg, c)).second); };
  expect_new(base, {"a", "cnn", 100, 0, 1});
  expect_new(base, {"a", "cnn", 100, 2, 2});
  expect_new(base, {"a", "cnn", 200, 2, 1});
  expect_new(base, {"a", "crnn", 100, 2, 1});
  expect_new(base, {"b", "cnn", 100, 2, 1});
  const std::vector<std::string> edits{
      "train: {steps: 4, batch_size: 4, eval_interval: 3, eval_batch_size: 32, divergence_grace: 1}",
      "train: {steps: 3, batch_size: 5, eval_interval: 3, eval_batch_size: 32}",
      "train: {steps: 3, batch_size: 4, eval_interval: 1, eval_batch_size: 32}",
      "train: {steps: 3, batch_size: 4, eval_interval: 3, eval_batch_size: 32, lr: 0.001}",
      "train: {steps: 3, batch_size: 4, eval_interval: 3, eval_batch_size: 32, weight_decay: 0.1}",
      "train: {steps: 3, batch_size: 4, eval_interval: 3, eval_batch_size: 32, reverse_labels: false}",
      "train: {steps: 3, batch_size: 4, eval_interval: 3, eval_batch_size: 32, milestones: [0.6]}",
      "train: {steps: 3, batch_size: 4, eval_interval: 3, eval_batch_size: 32, clip_norm: 1}",
      "train: {steps: 3, batch_size: 4, eval_interval: 3, eval_batch_size: 32, divergence_grace: 0.5}",
      "preprocess: {height: 32, max_width: 192, pad: 16}",
      "preprocess: {height: 32, max_width: 160, pad: 8}",
      "augment: {enabled: false}",
      "augment: {p_affine: 0.1}",
      "synth: {lines: 1300, max_len: 8, mean_len: 5, style: {height: 32}}",
      "synth: {lines: 1200, max_len: 8, mean_len: 5, seed: 12, style: {height: 32}}",
      "synth: {lines: 1200, max_len: 8, mean_len: 5, style: {height: 32, jitter: 0.5}}",
      "model_overrides: {all: {channels: [4, 8, 9], blocks: [1, 1, 1]}}",
      "model_overrides: {all: {channels: [4, 8, 8], blocks: [1, 2, 1]}}",
      "model_overrides: {all: {channels: [4, 8, 8], blocks: [1, 1, 1], column_pool: max}}",
      "aux: {a: [c, b]}",
  };
  for (const auto& e : edits) {
    std::string text = kSmall;
    const auto key = e.substr(0, e.find(':'));
    const auto start = text.find('\n' + key + ':') + 1;
    auto end = text.find('\n', start);
    // the model_overrides entry spans two lines
    if (key == "model_overrides") end = text.find('\n', end + 1);
    if (start == 0) text += e + '\n';
    else text.replace(start, end - start, e);
    INFO(e);
    expect_new(parse_config(text), cell);
  }
  // an override for another preset leaves this cell alone
  std::string other = kSmall;
  other.insert(other.find("train:"), "  crnn: {lstm_hidden: 16}\n");
  CHECK(cell_hash(parse_config(other), cell) == h);
  // output location and parallelism do not change results
  CHECK(cell_hash(parse_config(std::string(kSmall) + "out: elsewhere\nparallelism: 2\n"), cell) == h);
}

TEST_CASE("manifest datasets hash their content") {
  TempDir d("htr_exp_manifest");
  std::filesystem::create_directories(d.path / "m");
  const auto manifest = d.path / "m" / "manifest.tsv";
  std::ofstream(manifest) << "x\n";
  const std::string yaml = "datasets: [{name: a, path: m}, {name: b, synthetic: script_b}, {name: c, synthetic: "
                           "script_c}]\ntargets: [a]\n";
  const auto cfg = parse_config(yaml, d.path);
  const auto h = cell_hash(cfg, {"a", "cnn", 100, 0, 1});
  std::ofstream(manifest) << "y\n";
  CHECK(cell_hash(cfg, {"a", "cnn", 100, 0, 1}) != h);
}

TEST_CASE("results CSV round trip") {
  TempDir d("htr_exp_csv");
  const auto path = d.path / "r.csv";
  ResultRow a = row("x,y", "cnn", 100, 0, 1, 26.7);
  a.val_cer_best = 1.0 / 3.0;
  a.params = 1234567;
  a.steps = 2000;
  a.status = "failed \"quoted\"";
  const ResultRow b = row("x", "crnn", 500, 2, 3, 0.1 + 0.2);
  {
    ResultsWriter w(path);
    w.append(a);
    w.append(b);
  }
  const auto t = read_results(path);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == a);
  CHECK(t.rows[1] == b);
  CHECK(parse_row(format_row(b)) == b);
  CHECK(slurp(path).starts_with(std::string(kResultsHeader) + "\n"));
  CHECK_THROWS_AS(parse_row("a,b,c"), DataError);
  CHECK_THROWS_AS(parse_row("x,cnn,ten,0,1,1,1,1,1,ok,s,h"), DataError);

  const ResultRow nan_row = row("x", "cnn", 100, 0, 4, std::nan(""));
  CHECK(std::isnan(parse_row(format_row(nan_row)).test_cer));
}

TEST_CASE("an interrupted CSV write is repaired on reopen") {
  TempDir d("htr_exp_partial");
  const auto path = d.path / "r.csv";
  const ResultRow a = row("x", "cnn", 100, 0, 1, 20.0);
  const ResultRow b = row("x", "cnn", 100, 2, 1, 18.0);
  { ResultsWriter(path).append(a); }
  std::ofstream(path, std::ios::app) << "x,cnn,100,2,1,17.";
  CHECK(read_results(path).rows.size() == 1);
  { ResultsWriter(path).append(b); }
  const auto t = read_results(path);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1] == b);

  std::ofstream(d.path / "bad.csv") << "not,a,header\n";
  CHECK_THROWS_AS(read_results(d.path / "bad.csv"), DataError);
  CHECK_THROWS_AS(ResultsWriter(d.path / "bad.csv"), DataError);
}

TEST_CASE("delta pairing and the report table") {
  ResultsTable t;
  t.rows.push_back(row("khatt", "crnn", 100, 0, 1, 26.7));
  t.rows.push_back(row("khatt", "crnn", 100, 2, 1, 19.9));
  t.rows.push_back(row("khatt", "cnn", 100, 0, 1, 29.6));
  t.rows.push_back(row("khatt", "cnn", 100, 2, 1, 25.8));
  // duplicate record of a finished cell counts once
  t.rows.push_back(row("khatt", "cnn", 100, 2, 1, 25.8));
  // mismatched subset hash never pairs
  t.rows.push_back(row("khatt", "cnn-expand", 100, 0, 1, 30.0, "p"));
  t.rows.push_back(row("khatt", "cnn-expand", 100, 2, 1, 20.0, "q"));
  // failed runs never pair
  auto failed = row("phtd", "crnn", 100, 2, 1, 10.0);
  failed.status = "failed";
  t.rows.push_back(row("phtd", "crnn", 100, 0, 1, 31.4));
  t.rows.push_back(failed);

  const auto deltas = pair_deltas(t);
  REQUIRE(deltas.size() == 2);
  const auto table = report_table2(t);
  REQUIRE(table.find("khatt", 100, "crnn"));
  CHECK(table.find("khatt", 100, "crnn")->mean == doctest::Approx(-6.80).epsilon(1e-12));
  CHECK(table.find("khatt", 100, "cnn")->mean == doctest::Approx(-3.80).epsilon(1e-12));
  CHECK(table.find("khatt", 100, "cnn")->n == 1);
  CHECK(table.find("khatt", 100, "cnn-expand") == nullptr);
  CHECK(table.find("phtd", 100, "crnn") == nullptr);
  const auto text = table.format();
  CHECK(text.find("-6.80") != std::string::npos);
  CHECK(text.find("-3.80") != std::string::npos);

  ResultsTable none;
  none.rows.push_back(row("x", "cnn", 100, 0, 1, 1.0));
  CHECK_THROWS_AS(report_table2(none), DataError);

  ResultsTable same;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    same.rows.push_back(row("x", "cnn", 100, 0, s, 12.5));
    same.rows.push_back(row("x", "cnn", 100, 2, s, 12.5));
  }
  const auto zero = report_table2(same).find("x", 100, "cnn");
  CHECK(zero->mean == 0.0);
  CHECK(zero->std == 0.0);
  CHECK(zero->n == 3);
}

TEST_CASE("seed aggregation") {
  const auto a = aggregate({1.0, 2.0, 3.0});
  CHECK(a.mean == 2.0);
  CHECK(a.std == doctest::Approx(1.0));
  CHECK(aggregate({5.0}).std == 0.0);
  CHECK(aggregate({}).n == 0);
}

TEST_CASE("plot data files") {
  TempDir d("htr_exp_plot");
  ResultsTable empty;
  auto paths = emit_plotdata(empty, d.path, {"x"}, {"cnn"});
  REQUIRE(paths.size() == 1);
  CHECK(slurp(paths[0]) == std::string(kSeriesHeader) + "\n");
  CHECK(read_series(paths[0]).points.empty());

  ResultsTable one;
  one.rows.push_back(row("x", "cnn", 100, 0, 1, 30.0));
  paths = emit_plotdata(one, d.path, {"x"}, {"cnn"});
  const auto single = read_series(paths[0], "x", "cnn");
  REQUIRE(single.points.size() == 1);
  CHECK(single.points[0] == SeriesPoint{100, 0, 30.0, 0.0});

  ResultsTable many;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    many.rows.push_back(row("x", "cnn", 500, 2, s, 10.0 + s));
    many.rows.push_back(row("x", "cnn", 100, 0, s, 0.1 * s));
    many.rows.push_back(row("x", "crnn", 100, 0, s, 1.0));
  }
  const auto series = plot_series(many, {"x"}, {"cnn", "crnn"});
  REQUIRE(series.size() == 2);
  REQUIRE(series[0].points.size() == 2);
  CHECK(series[0].points[0].k == 100);
  CHECK(series[0].points[1].mean_cer == doctest::Approx(12.0));
  CHECK(series[0].points[1].std_cer == doctest::Approx(1.0));
  paths = emit_plotdata(many, d.path, {"x"}, {"cnn", "crnn"});
  CHECK(read_series(paths[0], "x", "cnn") == series[0]);
  CHECK(read_series(paths[1], "x", "crnn") == series[1]);
  CHECK(paths[0] == series_path(d.path, "x", "cnn"));
}

TEST_CASE("matrix runs resume after interruption") {
  TempDir d("htr_exp_resume");
  auto cfg = parse_config(kSmall);
  cfg.out = d.path;

  std::size_t started = 0;
  MatrixOptions stop_mid_cell;
  stop_mid_cell.before_cell = [&](const Cell&) { ++started; };
  stop_mid_cell.on_step = [&](const Cell&, std::size_t step) {
    if (started == 2 && step == 2) throw Interrupted("stop");
  };
  CHECK_THROWS_AS(run_matrix(cfg, stop_mid_cell), Interrupted);
  CHECK(read_results(results_path(cfg)).rows.size() == 1);
  std::ofstream(results_path(cfg), std::ios::app) << "a,cnn,100,2";

  const auto resumed = run_matrix(cfg);
  CHECK(resumed.skipped == 1);
  CHECK(resumed.executed == 3);
  CHECK(resumed.all_ok());
  CHECK(resumed.table.rows.size() == 4);
  CHECK(resumed.deltas.size() == 2);
  const auto csv = read_results(results_path(cfg));
  CHECK(csv.rows.size() == 4);
  std::set<std::string> hashes;
  for (const auto& r : csv.rows) hashes.insert(r.cell_hash);
  CHECK(hashes.size() == 4);
  for (const auto& dr : resumed.deltas) CHECK(!dr.subset_hash.empty());

  const auto again = run_matrix(cfg);
  CHECK(again.executed == 0);
  CHECK(again.skipped == 4);
  CHECK(again.table.rows == resumed.table.rows);
  CHECK(read_results(results_path(cfg)).rows.size() == 4);
}

TEST_CASE("failed cells are recorded once and not retried") {
  TempDir d("htr_exp_failed");
  auto cfg = parse_config(kSmall);
  cfg.out = d.path;
  MatrixOptions broken;
  broken.on_step = [](const Cell& c, std::size_t) {
    if (c.seed == 2 && c.j == 2) throw std::runtime_error("simulated fault");
  };
  const auto first = run_matrix(cfg, broken);
  CHECK(first.failed == 1);
  CHECK_FALSE(first.all_ok());
  CHECK(first.deltas.size() == 1);
  const auto again = run_matrix(cfg);
  CHECK(again.executed == 0);
  CHECK(again.failed == 1);
  const auto csv = read_results(results_path(cfg));
  REQUIRE(csv.rows.size() == 4);
  CHECK(csv.rows[3].status == "failed");
  CHECK(std::isnan(csv.rows[3].test_cer));
}

TEST_CASE("matrix rejects subsets larger than the target") {
  TempDir d("htr_exp_bigk");
  auto cfg = parse_config(kSmall);
  cfg.out = d.path;
  cfg.k = {100000};
  CHECK_THROWS_AS(run_matrix(cfg), ConfigError);
}

}
