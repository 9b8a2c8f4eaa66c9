#include "htr/data/vocab.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "htr/core/errors.hpp"
#include "htr/core/utf8.hpp"

namespace htr::data {

Vocabulary::Vocabulary(std::u32string chars) : chars_(std::move(chars)) {
  std::sort(chars_.begin(), chars_.end());
  chars_.erase(std::unique(chars_.begin(), chars_.end()), chars_.end());
  for (std::size_t i = 0; i < chars_.size(); ++i) index_[chars_[i]] = static_cast<std::uint32_t>(i);
}

std::uint32_t Vocabulary::id(char32_t c) const {
  auto it = index_.find(c);
  if (it == index_.end()) {
    throw DataError("character U+" + std::to_string(static_cast<std::uint32_t>(c)) + " ('" +
                    utf8::encode(std::u32string(1, c)) + "') is not in the vocabulary");
  }
  return it->second;
}

ctc::LabelSequence Vocabulary::encode(std::u32string_view text) const {
  ctc::LabelSequence out;
  out.reserve(text.size());
  for (char32_t c : text) out.push_back(id(c));
  return out;
}

std::u32string Vocabulary::decode(const ctc::LabelSequence& ids) const {
  std::u32string out;
  out.reserve(ids.size());
  for (auto i : ids) {
    if (i >= chars_.size()) throw DataError("label id " + std::to_string(i) + " outside the vocabulary");
    out.push_back(chars_[i]);
  }
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (char32_t c : chars_) {
    out += utf8::encode(std::u32string(1, c));
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  std::u32string chars;
  std::istringstream is{std::string(text)};
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cps = utf8::decode(line);
    if (cps.size() != 1) throw DataError("vocabulary line must hold exactly one character: '" + line + "'");
    chars.push_back(cps[0]);
  }
  return Vocabulary(std::move(chars));
}

Vocabulary build_vocab(const std::vector<std::string>& texts) {
  std::set<char32_t> all;
  for (const auto& t : texts) {
    for (char32_t c : utf8::decode(t)) all.insert(c);
  }
  if (all.empty()) throw DataError("cannot build a vocabulary from empty training texts");
  return Vocabulary(std::u32string(all.begin(), all.end()));
}

}  // namespace htr::data
