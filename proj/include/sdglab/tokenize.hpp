#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sdglab/detail/unicode.hpp"

namespace sdgl {

using Tokens = std::vector<std::string>;

/// Splits text into maximal runs of Unicode letters/digits, case-folded.
/// Everything else, hyphens and apostrophes included, separates tokens.
inline Tokens tokenize(std::string_view text) {
  Tokens tokens;
  std::string current;
  for (std::size_t i = 0; i < text.size();) {
    const auto cp = detail::decode_utf8(text, i);
    i += cp.length;
    if (detail::is_word_char(cp.value)) {
      detail::append_utf8(current, detail::fold_case(cp.value));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

}  // namespace sdgl
