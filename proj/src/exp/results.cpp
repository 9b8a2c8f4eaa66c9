#include "htr/exp/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "htr/core/errors.hpp"
#include "htr/metrics/cer.hpp"

namespace htr::exp {
namespace {

std::string number(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_double(std::string_view s, const char* field) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError(std::string("results: bad ") + field + " '" + std::string(s) + "'");
  }
  return v;
}

template <typename T>
T parse_uint(std::string_view s, const char* field) {
  T v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError(std::string("results: bad ") + field + " '" + std::string(s) + "'");
  }
  return v;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw DataError("results: unterminated quote");
  return fields;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_cell(const Aggregate* a) {
  if (!a) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f ± %.2f (n=%zu)", a->mean, a->std, a->n);
  return buf;
}

std::string pad_to(std::string s, std::size_t width) {
  // count code points, not bytes, so "±" aligns
  std::size_t len = 0;
  for (unsigned char c : s) len += (c & 0xC0) != 0x80;
  if (len < width) s.append(width - len, ' ');
  return s;
}

}  // namespace

std::string format_row(const ResultRow& r) {
  std::ostringstream os;
  os << quote(r.dataset) << ',' << quote(r.model) << ',' << r.k << ',' << r.j << ',' << r.seed << ','
     << number(r.test_cer) << ',' << number(r.val_cer_best) << ',' << r.params << ',' << r.steps << ','
     << quote(r.status) << ',' << quote(r.subset_hash) << ',' << quote(r.cell_hash);
  return os.str();
}

ResultRow parse_row(std::string_view line) {
  const auto f = split_csv(line);
  if (f.size() != 12) throw DataError("results: expected 12 fields, got " + std::to_string(f.size()));
  ResultRow r;
  r.dataset = f[0];
  r.model = f[1];
  r.k = parse_uint<std::size_t>(f[2], "K");
  r.j = parse_uint<std::size_t>(f[3], "J");
  r.seed = parse_uint<std::uint64_t>(f[4], "seed");
  r.test_cer = parse_double(f[5], "test_CER");
  r.val_cer_best = parse_double(f[6], "val_CER_best");
  r.params = parse_uint<std::size_t>(f[7], "params");
  r.steps = parse_uint<std::size_t>(f[8], "steps");
  r.status = f[9];
  r.subset_hash = f[10];
  r.cell_hash = f[11];
  return r;
}

ResultsTable read_results(const std::filesystem::path& path) {
  const std::string text = slurp(path);
  ResultsTable table;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // interrupted write
    std::string_view line(text.data() + pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    if (header) {
      if (line != kResultsHeader) throw DataError(path.string() + ": unexpected results header");
      header = false;
      continue;
    }
    if (!line.empty()) table.rows.push_back(parse_row(line));
  }
  if (header) throw DataError(path.string() + ": missing results header");
  return table;
}

ResultsWriter::ResultsWriter(const std::filesystem::path& path) : path_(path) {
  bool fresh = true;
  if (std::filesystem::exists(path)) {
    const std::string text = slurp(path);
    const auto last_nl = text.rfind('\n');
    const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (keep < text.size()) std::filesystem::resize_file(path, keep);
    fresh = keep == 0;
    if (!fresh) read_results(path);  // validates header and rows
  } else if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  out_.open(path, std::ios::binary | std::ios::app);
  if (!out_) throw DataError("cannot open " + path.string() + " for appending");
  if (fresh) {
    out_ << kResultsHeader << '\n';
    out_.flush();
  }
}

void ResultsWriter::append(const ResultRow& row) {
  const std::string line = format_row(row) + '\n';
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw DataError("write to " + path_.string() + " failed");
}

std::vector<DeltaRow> pair_deltas(const ResultsTable& table) {
  std::vector<const ResultRow*> unique;
  std::set<std::string> seen;
  for (const auto& r : table.rows) {
    if (r.cell_hash.empty() || seen.insert(r.cell_hash).second) unique.push_back(&r);
  }
  std::vector<DeltaRow> out;
  for (const auto* multi : unique) {
    if (multi->j != 2 || !multi->ok()) continue;
    for (const auto* single : unique) {
      if (single->j != 0 || !single->ok()) continue;
      if (single->dataset != multi->dataset || single->model != multi->model || single->k != multi->k ||
          single->seed != multi->seed || single->subset_hash != multi->subset_hash) {
        continue;
      }
      out.push_back({multi->dataset, multi->model, multi->k, multi->seed, multi->subset_hash, single->test_cer,
                     multi->test_cer, metrics::delta_cer(multi->test_cer, single->test_cer)});
      break;
    }
  }
  return out;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  a.n = values.size();
  if (a.n == 0) return a;
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(a.n);
  if (a.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(a.n - 1));
  }
  return a;
}

const Aggregate* Table2::find(const std::string& dataset, std::size_t k, const std::string& model) const {
  const auto row = cells.find({dataset, k});
  if (row == cells.end()) return nullptr;
  const auto it = row->second.find(model);
  return it == row->second.end() ? nullptr : &it->second;
}

std::string Table2::format() const {
  constexpr std::size_t kCol = 24;
  std::size_t name_w = 7;
  for (const auto& [key, _] : cells) name_w = std::max(name_w, key.first.size() + 2);
  std::ostringstream os;
  os << pad_to("dataset", name_w) << pad_to("K", 7);
  for (const auto& m : models) os << pad_to(m, kCol);
  os << '\n';
  for (const auto& [key, _] : cells) {
    std::string line = pad_to(key.first, name_w) + pad_to(std::to_string(key.second), 7);
    for (const auto& m : models) line += pad_to(format_cell(find(key.first, key.second, m)), kCol);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    os << line << '\n';
  }
  os << "ΔCER = CER(J=2) - CER(J=0) in CER points, mean ± std over seeds; negative means improvement.\n";
  return os.str();
}

Table2 report_table2(const ResultsTable& table, const std::vector<std::string>& models) {
  const auto deltas = pair_deltas(table);
  if (deltas.empty()) throw DataError("no paired single-/multi-script runs to report");
  std::map<std::pair<std::string, std::size_t>, std::map<std::string, std::vector<double>>> grouped;
  for (const auto& d : deltas) grouped[{d.dataset, d.k}][d.model].push_back(d.delta);
  Table2 out;
  out.models = models;
  for (const auto& [key, by_model] : grouped) {
    auto& row = out.cells[key];
    for (const auto& [m, values] : by_model) {
      if (std::find(models.begin(), models.end(), m) != models.end()) row[m] = aggregate(values);
    }
  }
  return out;
}

std::vector<Series> plot_series(const ResultsTable& table, const std::vector<std::string>& datasets,
                                const std::vector<std::string>& models) {
  std::vector<Series> out;
  std::set<std::string> seen;
  for (const auto& d : datasets) {
    for (const auto& m : models) {
      std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> grouped;
      for (const auto& r : table.rows) {
        if (r.dataset != d || r.model != m || !r.ok()) continue;
        if (!r.cell_hash.empty() && !seen.insert(r.cell_hash).second) continue;
        grouped[{r.k, r.j}].push_back(r.test_cer);
      }
      Series s{d, m, {}};
      for (const auto& [kj, values] : grouped) {
        const auto a = aggregate(values);
        s.points.push_back({kj.first, kj.second, a.mean, a.std});
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::filesystem::path series_path(const std::filesystem::path& dir, const std::string& dataset,
                                  const std::string& model) {
  return dir / (dataset + "_" + model + ".tsv");
}

void write_series(const std::filesystem::path& path, const Series& s) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << kSeriesHeader << '\n';
  for (const auto& p : s.points) {
    out << p.k << '\t' << p.j << '\t' << number(p.mean_cer) << '\t' << number(p.std_cer) << '\n';
  }
  if (!out) throw DataError("write to " + path.string() + " failed");
}

Series read_series(const std::filesystem::path& path, const std::string& dataset, const std::string& model) {
  std::istringstream in(slurp(path));
  std::string line;
  if (!std::getline(in, line) || line != kSeriesHeader) throw DataError(path.string() + ": bad series header");
  Series s{dataset, model, {}};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string tok; std::getline(ls, tok, '\t');) f.push_back(tok);
    if (f.size() != 4) throw DataError(path.string() + ": expected 4 columns");
    s.points.push_back({parse_uint<std::size_t>(f[0], "K"), parse_uint<std::size_t>(f[1], "J"),
                        parse_double(f[2], "mean_CER"), parse_double(f[3], "std_CER")});
  }
  return s;
}

std::vector<std::filesystem::path> emit_plotdata(const ResultsTable& table, const std::filesystem::path& dir,
                                                 const std::vector<std::string>& datasets,
                                                 const std::vector<std::string>& models) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (const auto& s : plot_series(table, datasets, models)) {
    paths.push_back(series_path(dir, s.dataset, s.model));
    write_series(paths.back(), s);
  }
  return paths;
}

}  // namespace htr::exp
