#include "htr/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "htr/core/errors.hpp"
#include "htr/core/utf8.hpp"

namespace htr::data {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

void check_field(const std::string& value, const char* what) {
  if (value.find_first_of("\t\n\r") != std::string::npos) {
    throw DataError(std::string("manifest ") + what + " contains a tab or newline: '" + value + "'");
  }
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val" || s == "valid" || s == "validation") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split '" + std::string(s) + "'");
}

Dataset::Dataset(std::string name, std::filesystem::path root, std::vector<LineSample> samples)
    : name_(std::move(name)), root_(std::move(root)), samples_(std::move(samples)), images_(samples_.size()) {
  std::set<std::string> seen;
  for (const auto& s : samples_) {
    if (!seen.insert(s.id).second) throw DataError("duplicate sample id '" + s.id + "' in " + name_);
    if (s.split != Split::test && utf8::decode(s.text).empty()) {
      throw DataError("sample '" + s.id + "' has an empty transcription outside the test split");
    }
  }
}

std::vector<std::size_t> Dataset::split_indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].split == split) out.push_back(i);
  }
  std::sort(out.begin(), out.end(), [&](auto a, auto b) { return samples_[a].id < samples_[b].id; });
  return out;
}

std::vector<std::string> Dataset::texts(Split split) const {
  std::vector<std::string> out;
  for (auto i : split_indices(split)) out.push_back(samples_[i].text);
  return out;
}

const GrayImage& Dataset::image(std::size_t i) const {
  auto& slot = images_.at(i);
  if (!slot) {
    const auto& p = samples_[i].image_path;
    slot = load_image(p.is_absolute() ? p : root_ / p);
    if (slot->empty()) throw DataError("sample '" + samples_[i].id + "' has a zero-area image");
  }
  return *slot;
}

void Dataset::preload() const {
  for (std::size_t i = 0; i < samples_.size(); ++i) image(i);
}

void Dataset::set_image(std::size_t i, GrayImage image) { images_.at(i) = std::move(image); }

std::vector<LineSample> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("manifest " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_tabs(line);
  const std::vector<std::string> expected{"id", "image", "text", "language", "split"};
  if (header != expected) {
    throw DataError("manifest " + path.string() + " must start with the header id/image/text/language/split");
  }
  std::vector<LineSample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 5) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 5 tab-separated fields, got " +
                      std::to_string(f.size()));
    }
    utf8::decode(f[2]);  // validates encoding
    out.push_back({f[0], f[1], f[2], f[3], split_from_string(f[4])});
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<LineSample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << "id\timage\ttext\tlanguage\tsplit\n";
  for (const auto& s : samples) {
    check_field(s.id, "id");
    check_field(s.image_path.string(), "image path");
    check_field(s.text, "text");
    check_field(s.language, "language");
    out << s.id << '\t' << s.image_path.string() << '\t' << s.text << '\t' << s.language << '\t'
        << to_string(s.split) << '\n';
  }
}

Dataset load_dataset(const std::filesystem::path& dir, std::string name) {
  if (name.empty()) name = dir.filename().string();
  return Dataset(std::move(name), dir, read_manifest(dir / kManifestName));
}

}  // namespace htr::data
