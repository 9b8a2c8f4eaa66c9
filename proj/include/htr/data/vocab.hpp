#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "htr/ctc/ctc.hpp"

namespace htr::data {

/// Sorted character inventory; ids are positions, the blank is the next id.
class Vocabulary {
 public:
  Vocabulary() = default;
  /// Characters are deduplicated and sorted by code point.
  explicit Vocabulary(std::u32string chars);

  std::size_t size() const noexcept { return chars_.size(); }
  std::uint32_t blank_id() const noexcept { return static_cast<std::uint32_t>(chars_.size()); }
  const std::u32string& chars() const noexcept { return chars_; }

  bool contains(char32_t c) const { return index_.contains(c); }
  std::uint32_t id(char32_t c) const;

  /// Throws DataError naming the first character outside the inventory.
  ctc::LabelSequence encode(std::u32string_view text) const;
  std::u32string decode(const ctc::LabelSequence& ids) const;

  /// One UTF-8 character per line.
  std::string serialize() const;
  static Vocabulary parse(std::string_view text);

  bool operator==(const Vocabulary& o) const { return chars_ == o.chars_; }

 private:
  std::u32string chars_;
  std::map<char32_t, std::uint32_t> index_;
};

/// Sorted union of every character in the given texts (UTF-8). Throws DataError when empty.
Vocabulary build_vocab(const std::vector<std::string>& texts);

}  // namespace htr::data
