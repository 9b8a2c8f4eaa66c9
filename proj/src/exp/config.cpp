#include "htr/exp/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "htr/core/errors.hpp"
#include "htr/core/hash.hpp"

namespace htr::exp {
namespace {

const std::vector<std::string> kPresets{"cnn", "cnn-expand", "crnn"};

bool is_preset(const std::string& s) { return std::find(kPresets.begin(), kPresets.end(), s) != kPresets.end(); }

template <typename T>
bool has_duplicates(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  return std::adjacent_find(v.begin(), v.end()) != v.end();
}

// ---- YAML reading -------------------------------------------------------------

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where) {
  const auto v = node[key];
  if (!v) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": invalid value");
  }
}

template <typename T>
void read_list(const YAML::Node& node, const char* key, std::vector<T>& out, const std::string& where) {
  const auto v = node[key];
  if (!v) return;
  if (!v.IsSequence()) throw ConfigError(where + "." + key + ": expected a list");
  std::vector<T> tmp;
  for (const auto& e : v) {
    try {
      tmp.push_back(e.as<T>());
    } catch (const YAML::Exception&) {
      throw ConfigError(where + "." + key + ": invalid list entry");
    }
  }
  out = std::move(tmp);
}

std::optional<std::array<std::size_t, 3>> read_triple(const YAML::Node& node, const char* key,
                                                      const std::string& where) {
  std::vector<std::size_t> v;
  read_list(node, key, v, where);
  if (!node[key]) return std::nullopt;
  if (v.size() != 3) throw ConfigError(where + "." + key + ": expected three integers");
  return std::array<std::size_t, 3>{v[0], v[1], v[2]};
}

ModelOverride read_override(const YAML::Node& node, const std::string& where) {
  check_keys(node, where, {"channels", "blocks", "lstm_layers", "lstm_hidden", "column_pool"});
  ModelOverride o;
  o.channels = read_triple(node, "channels", where);
  o.blocks = read_triple(node, "blocks", where);
  if (node["lstm_layers"]) read(node, "lstm_layers", o.lstm_layers.emplace(), where);
  if (node["lstm_hidden"]) read(node, "lstm_hidden", o.lstm_hidden.emplace(), where);
  if (node["column_pool"]) {
    std::string mode;
    read(node, "column_pool", mode, where);
    if (mode == "mean") o.column_pool = nn::ColumnPoolMode::mean;
    else if (mode == "max") o.column_pool = nn::ColumnPoolMode::max;
    else throw ConfigError(where + ".column_pool: expected mean or max");
  }
  return o;
}

void read_train(const YAML::Node& n, train::TrainConfig& t) {
  const std::string w = "train";
  check_keys(n, w, {"steps", "batch_size", "eval_interval", "eval_batch_size", "lr", "milestones", "lr_gamma",
                    "weight_decay", "beta1", "beta2", "eps", "clip_norm", "reverse_labels", "divergence_cer",
                    "divergence_grace"});
  read(n, "steps", t.total_steps, w);
  read(n, "batch_size", t.batch_size, w);
  read(n, "eval_interval", t.eval_interval, w);
  read(n, "eval_batch_size", t.eval_batch_size, w);
  read(n, "lr", t.base_lr, w);
  read_list(n, "milestones", t.milestones, w);
  read(n, "lr_gamma", t.lr_gamma, w);
  read(n, "weight_decay", t.adamw.weight_decay, w);
  read(n, "beta1", t.adamw.beta1, w);
  read(n, "beta2", t.adamw.beta2, w);
  read(n, "eps", t.adamw.eps, w);
  read(n, "clip_norm", t.clip_norm, w);
  read(n, "reverse_labels", t.reverse_labels, w);
  read(n, "divergence_cer", t.divergence_cer, w);
  read(n, "divergence_grace", t.divergence_grace, w);
}

void read_augment(const YAML::Node& n, train::TrainConfig& t) {
  const std::string w = "augment";
  check_keys(n, w, {"enabled", "p_affine", "rotate_deg", "shear_deg", "scale", "p_distort", "elastic_alpha",
                    "elastic_sigma", "grid_cells", "grid_jitter", "p_morph", "p_photometric", "brightness",
                    "contrast"});
  auto& a = t.augment;
  read(n, "enabled", t.augment_enabled, w);
  read(n, "p_affine", a.p_affine, w);
  read(n, "rotate_deg", a.rotate_deg, w);
  read(n, "shear_deg", a.shear_deg, w);
  read(n, "scale", a.scale, w);
  read(n, "p_distort", a.p_distort, w);
  read(n, "elastic_alpha", a.elastic_alpha, w);
  read(n, "elastic_sigma", a.elastic_sigma, w);
  read(n, "grid_cells", a.grid_cells, w);
  read(n, "grid_jitter", a.grid_jitter, w);
  read(n, "p_morph", a.p_morph, w);
  read(n, "p_photometric", a.p_photometric, w);
  read(n, "brightness", a.brightness, w);
  read(n, "contrast", a.contrast, w);
}

void read_synth(const YAML::Node& n, SynthSettings& s) {
  const std::string w = "synth";
  check_keys(n, w, {"seed", "lines", "script_seed", "specific_weight", "favored", "favored_mass", "mean_len",
                    "std_len", "max_len", "style"});
  read(n, "seed", s.seed, w);
  read(n, "lines", s.lines, w);
  read(n, "script_seed", s.scripts.seed, w);
  read(n, "specific_weight", s.scripts.specific_weight, w);
  read(n, "favored", s.scripts.favored, w);
  read(n, "favored_mass", s.scripts.favored_mass, w);
  read(n, "mean_len", s.scripts.mean_len, w);
  read(n, "std_len", s.scripts.std_len, w);
  read(n, "max_len", s.scripts.max_len, w);
  if (const auto st = n["style"]) {
    const std::string ws = "synth.style";
    check_keys(st, ws, {"height", "scale_min", "scale_max", "slant_max", "thickness_min", "thickness_max", "jitter",
                        "wobble", "dot_dropout"});
    read(st, "height", s.style.height, ws);
    read(st, "scale_min", s.style.scale_min, ws);
    read(st, "scale_max", s.style.scale_max, ws);
    read(st, "slant_max", s.style.slant_max, ws);
    read(st, "thickness_min", s.style.thickness_min, ws);
    read(st, "thickness_max", s.style.thickness_max, ws);
    read(st, "jitter", s.style.jitter, ws);
    read(st, "wobble", s.style.wobble, ws);
    read(st, "dot_dropout", s.style.dot_dropout, ws);
  }
}

// ---- canonical description ------------------------------------------------------

using Json = nlohmann::ordered_json;

Json synth_json(const SynthSettings& s) {
  const auto& c = s.scripts;
  const auto& st = s.style;
  return Json{{"seed", s.seed},
              {"lines", s.lines},
              {"script_seed", c.seed},
              {"specific_weight", c.specific_weight},
              {"favored", c.favored},
              {"favored_mass", c.favored_mass},
              {"mean_len", c.mean_len},
              {"std_len", c.std_len},
              {"max_len", c.max_len},
              {"style",
               {{"height", st.height},
                {"scale", {st.scale_min, st.scale_max}},
                {"slant_max", st.slant_max},
                {"thickness", {st.thickness_min, st.thickness_max}},
                {"jitter", st.jitter},
                {"wobble", st.wobble},
                {"dot_dropout", st.dot_dropout}}}};
}

std::string file_digest(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex64(fnv1a(ss.str()));
}

Json source_json(const ExperimentConfig& cfg, const std::string& name) {
  const auto& src = cfg.source(name);
  if (src.is_synthetic()) return Json{{"name", name}, {"synthetic", src.synthetic}, {"synth", synth_json(cfg.synth)}};
  return Json{{"name", name}, {"manifest", file_digest(cfg.resolve(src.path) / data::kManifestName)}};
}

Json train_json(const train::TrainConfig& t) {
  const auto& a = t.augment;
  Json augment = t.augment_enabled ? Json{{"p_affine", a.p_affine},
                                          {"rotate_deg", a.rotate_deg},
                                          {"shear_deg", a.shear_deg},
                                          {"scale", a.scale},
                                          {"p_distort", a.p_distort},
                                          {"elastic_alpha", a.elastic_alpha},
                                          {"elastic_sigma", a.elastic_sigma},
                                          {"grid_cells", a.grid_cells},
                                          {"grid_jitter", a.grid_jitter},
                                          {"p_morph", a.p_morph},
                                          {"p_photometric", a.p_photometric},
                                          {"brightness", a.brightness},
                                          {"contrast", a.contrast}}
                                   : Json("disabled");
  return Json{{"steps", t.total_steps},
              {"batch_size", t.batch_size},
              {"eval_interval", t.effective_eval_interval()},
              {"eval_batch_size", t.eval_batch_size},
              {"lr", t.base_lr},
              {"milestones", t.milestones},
              {"lr_gamma", t.lr_gamma},
              {"weight_decay", t.adamw.weight_decay},
              {"betas", {t.adamw.beta1, t.adamw.beta2}},
              {"eps", t.adamw.eps},
              {"clip_norm", t.clip_norm},
              {"reverse_labels", t.reverse_labels},
              {"divergence", {t.divergence_cer, t.divergence_grace}},
              {"preprocess", {t.preprocess.height, t.preprocess.max_width, t.preprocess.pad}},
              {"augment", augment}};
}

model::ModelSpec spec_with_overrides(const ExperimentConfig& cfg, const std::string& preset, std::size_t vocab) {
  auto spec = model::ModelSpec::preset(preset, vocab);
  auto apply = [&](const ModelOverride& o) {
    if (o.channels) spec.channels = *o.channels;
    if (o.blocks) spec.blocks = *o.blocks;
    if (o.column_pool) spec.column_pool = *o.column_pool;
    if (spec.family == model::Family::crnn) {
      if (o.lstm_layers) spec.lstm_layers = *o.lstm_layers;
      if (o.lstm_hidden) spec.lstm_hidden = *o.lstm_hidden;
    }
  };
  if (auto it = cfg.model_overrides.find("all"); it != cfg.model_overrides.end()) apply(it->second);
  if (auto it = cfg.model_overrides.find(preset); it != cfg.model_overrides.end()) apply(it->second);
  spec.input_height = cfg.train.preprocess.height;
  return spec;
}

std::vector<std::string> synthetic_names(const SynthSettings& s) {
  std::vector<std::string> names;
  for (const auto& script : synth::default_scripts(s.scripts)) names.push_back(script.name);
  return names;
}

}  // namespace

// ---- ExperimentConfig ---------------------------------------------------------------

const DatasetSource& ExperimentConfig::source(const std::string& name) const {
  for (const auto& d : datasets) {
    if (d.name == name) return d;
  }
  throw ConfigError("unknown dataset '" + name + "'");
}

std::vector<std::string> ExperimentConfig::aux_for(const std::string& target) const {
  if (auto it = aux.find(target); it != aux.end()) return it->second;
  std::vector<std::string> out;
  for (const auto& d : datasets) {
    if (d.name != target) out.push_back(d.name);
  }
  return out;
}

std::vector<std::string> ExperimentConfig::participants(const std::string& target) const {
  const std::size_t jmax = j.empty() ? 0 : *std::max_element(j.begin(), j.end());
  auto a = aux_for(target);
  a.resize(std::min(a.size(), jmax));
  std::vector<std::string> out{target};
  out.insert(out.end(), a.begin(), a.end());
  return out;
}

model::ModelSpec ExperimentConfig::model_spec(const std::string& preset, std::size_t vocab_size) const {
  auto spec = spec_with_overrides(*this, preset, vocab_size);
  spec.validate();
  return spec;
}

std::filesystem::path ExperimentConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

void ExperimentConfig::validate() const {
  if (datasets.empty()) throw ConfigError("no datasets configured");
  std::vector<std::string> names;
  std::vector<std::string> scripts;
  for (const auto& d : datasets) {
    if (d.name.empty()) throw ConfigError("dataset without a name");
    if (d.path.empty() == d.synthetic.empty()) {
      throw ConfigError("dataset '" + d.name + "' needs exactly one of path or synthetic");
    }
    if (d.is_synthetic()) {
      if (scripts.empty()) scripts = synthetic_names(synth);
      if (std::find(scripts.begin(), scripts.end(), d.synthetic) == scripts.end()) {
        throw ConfigError("dataset '" + d.name + "': unknown synthetic script '" + d.synthetic + "'");
      }
    }
    names.push_back(d.name);
  }
  if (has_duplicates(names)) throw ConfigError("duplicate dataset names");
  if (targets.empty()) throw ConfigError("no target datasets");
  if (has_duplicates(targets)) throw ConfigError("duplicate targets");
  for (const auto& t : targets) source(t);
  for (const auto& [t, list] : aux) {
    source(t);
    if (has_duplicates(list)) throw ConfigError("duplicate auxiliary datasets for '" + t + "'");
    for (const auto& a : list) {
      source(a);
      if (a == t) throw ConfigError("dataset '" + t + "' cannot be its own auxiliary");
    }
  }
  if (models.empty()) throw ConfigError("no models configured");
  if (has_duplicates(models)) throw ConfigError("duplicate models");
  for (const auto& m : models) {
    if (!is_preset(m)) throw ConfigError("unknown model '" + m + "' (expected cnn, cnn-expand, crnn)");
  }
  for (const auto& [key, _] : model_overrides) {
    if (key != "all" && !is_preset(key)) throw ConfigError("model_overrides: unknown model '" + key + "'");
  }
  for (const auto& m : models) model_spec(m, 1);
  if (k.empty() || has_duplicates(k)) throw ConfigError("k must be a non-empty list of distinct sizes");
  for (auto v : k) {
    if (v == 0) throw ConfigError("k must be positive");
  }
  if (j.empty() || has_duplicates(j)) throw ConfigError("j must be a non-empty list of distinct values");
  for (auto v : j) {
    if (v != 0 && v != 2) throw ConfigError("j must be 0 or 2");
    for (const auto& t : targets) {
      if (aux_for(t).size() < v) {
        throw ConfigError("j=" + std::to_string(v) + " needs " + std::to_string(v) + " auxiliary datasets for '" + t +
                          "'");
      }
    }
  }
  if (seeds.empty() || has_duplicates(seeds)) throw ConfigError("seeds must be a non-empty list of distinct values");

  const auto& t = train;
  if (t.batch_size == 0 || t.eval_batch_size == 0) throw ConfigError("train: batch sizes must be positive");
  if (!(t.base_lr > 0)) throw ConfigError("train.lr must be positive");
  if (!std::is_sorted(t.milestones.begin(), t.milestones.end())) throw ConfigError("train.milestones must be sorted");
  for (auto m : t.milestones) {
    if (!(m > 0 && m <= 1)) throw ConfigError("train.milestones must lie in (0, 1]");
  }
  if (!(t.lr_gamma > 0)) throw ConfigError("train.lr_gamma must be positive");
  if (!(t.adamw.beta1 >= 0 && t.adamw.beta1 < 1 && t.adamw.beta2 >= 0 && t.adamw.beta2 < 1)) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (!(t.adamw.eps > 0)) throw ConfigError("train.eps must be positive");
  if (!(t.adamw.weight_decay >= 0)) throw ConfigError("train.weight_decay must be non-negative");
  if (!(t.divergence_grace >= 0 && t.divergence_grace <= 1)) {
    throw ConfigError("train.divergence_grace must lie in [0, 1]");
  }
  if (t.preprocess.height < 16 || t.preprocess.max_width < 16) throw ConfigError("preprocess: image too small");
  const auto& a = t.augment;
  for (double p : {a.p_affine, a.p_distort, a.p_morph, a.p_photometric}) {
    if (!(p >= 0 && p <= 1)) throw ConfigError("augment: probabilities must lie in [0, 1]");
  }
  if (parallelism == 0) throw ConfigError("parallelism must be positive");
  if (synth.lines == 0) throw ConfigError("synth.lines must be positive");
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  for (const auto& name : synthetic_names(cfg.synth)) {
    cfg.datasets.push_back({name, {}, name});
    cfg.targets.push_back(name);
  }
  cfg.train.total_steps = 20000;
  return cfg;
}

ExperimentConfig parse_config(const std::string& yaml, const std::filesystem::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  ExperimentConfig cfg = default_config();
  cfg.base_dir = base_dir;
  if (!root || root.IsNull()) return cfg;
  check_keys(root, "config", {"out", "parallelism", "datasets", "targets", "aux", "models", "k", "j", "seeds",
                              "model_overrides", "train", "preprocess", "augment", "synth"});
  std::string out;
  read(root, "out", out, "config");
  if (!out.empty()) cfg.out = cfg.resolve(out);
  read(root, "parallelism", cfg.parallelism, "config");
  if (const auto ds = root["datasets"]) {
    if (!ds.IsSequence()) throw ConfigError("datasets: expected a list");
    cfg.datasets.clear();
    cfg.targets.clear();
    for (const auto& d : ds) {
      check_keys(d, "datasets[]", {"name", "path", "synthetic"});
      DatasetSource src;
      std::string path;
      read(d, "name", src.name, "datasets[]");
      read(d, "path", path, "datasets[]");
      read(d, "synthetic", src.synthetic, "datasets[]");
      src.path = path;
      if (src.name.empty()) src.name = src.synthetic;
      cfg.datasets.push_back(src);
      cfg.targets.push_back(src.name);
    }
  }
  read_list(root, "targets", cfg.targets, "config");
  if (const auto aux = root["aux"]) {
    if (!aux.IsMap()) throw ConfigError("aux: expected a mapping from target to dataset list");
    for (const auto& kv : aux) {
      std::vector<std::string> list;
      const auto key = kv.first.as<std::string>();
      YAML::Node holder;
      holder["v"] = kv.second;
      read_list(holder, "v", list, "aux." + key);
      cfg.aux[key] = list;
    }
  }
  read_list(root, "models", cfg.models, "config");
  read_list(root, "k", cfg.k, "config");
  read_list(root, "j", cfg.j, "config");
  read_list(root, "seeds", cfg.seeds, "config");
  if (const auto mo = root["model_overrides"]) {
    if (!mo.IsMap()) throw ConfigError("model_overrides: expected a mapping");
    for (const auto& kv : mo) {
      const auto key = kv.first.as<std::string>();
      cfg.model_overrides[key] = read_override(kv.second, "model_overrides." + key);
    }
  }
  if (const auto t = root["train"]) read_train(t, cfg.train);
  if (const auto p = root["preprocess"]) {
    check_keys(p, "preprocess", {"height", "max_width", "pad"});
    read(p, "height", cfg.train.preprocess.height, "preprocess");
    read(p, "max_width", cfg.train.preprocess.max_width, "preprocess");
    read(p, "pad", cfg.train.preprocess.pad, "preprocess");
  }
  if (const auto a = root["augment"]) read_augment(a, cfg.train);
  if (const auto s = root["synth"]) read_synth(s, cfg.synth);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.target) cfg.targets = {*o.target};
  if (o.aux) {
    for (const auto& t : cfg.targets) cfg.aux[t] = *o.aux;
  }
  if (o.model) cfg.models = {*o.model};
  if (o.k) cfg.k = {*o.k};
  if (o.j) cfg.j = {*o.j};
  if (o.seed) cfg.seeds = {*o.seed};
  if (o.steps) cfg.train.total_steps = *o.steps;
  if (o.out) cfg.out = *o.out;
  cfg.validate();
}

std::vector<Cell> enumerate_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (const auto& t : cfg.targets) {
    for (const auto& m : cfg.models) {
      for (auto k : cfg.k) {
        for (auto s : cfg.seeds) {
          for (auto j : cfg.j) cells.push_back({t, m, k, j, s});
        }
      }
    }
  }
  return cells;
}

std::string cell_description(const ExperimentConfig& cfg, const Cell& cell) {
  auto aux = cfg.aux_for(cell.target);
  aux.resize(std::min(aux.size(), cell.j));
  Json j;
  j["target"] = source_json(cfg, cell.target);
  auto& aj = j["aux"] = Json::array();
  for (const auto& a : aux) aj.push_back(source_json(cfg, a));
  auto& vj = j["vocabulary"] = Json::array();
  for (const auto& p : cfg.participants(cell.target)) vj.push_back(p);
  j["model"] = spec_with_overrides(cfg, cell.model, 0).serialize();
  j["k"] = cell.k;
  j["j"] = cell.j;
  j["seed"] = cell.seed;
  j["train"] = train_json(cfg.train);
  return j.dump();
}

std::string cell_hash(const ExperimentConfig& cfg, const Cell& cell) {
  return hex64(fnv1a(cell_description(cfg, cell)));
}

}  // namespace htr::exp
