#pragma once

#include <string>
#include <string_view>

namespace htr::utf8 {

/// Strict UTF-8 decoding to code points; throws DataError on malformed input.
std::u32string decode(std::string_view s);
std::string encode(std::u32string_view s);

}  // namespace htr::utf8
