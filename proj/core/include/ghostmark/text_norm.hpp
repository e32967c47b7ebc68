#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace ghostmark {

/// Canonical text form used everywhere markers are matched or texts are
/// compared: Unicode NFC composition, then every whitespace run collapsed to
/// a single U+0020, leading/trailing whitespace dropped.
std::string normalize_text(std::string_view utf8);

/// normalize_text plus per-codepoint simple case folding. This is the
/// corpus dedup key and the form patterns are compared in.
std::string normalize_casefold(std::string_view utf8);

/// Simple (1:1) case folding of a single codepoint.
char32_t fold_codepoint(char32_t cp);

/// Word characters for the boundary rule: Unicode letters, digits, and the
/// ASCII apostrophe U+0027.
bool is_word_char(char32_t cp);

/// Decoded view of a UTF-8 string. byte_offset[i] is the byte position of
/// codepoint i; byte_offset[size] is the total byte length, so the byte span
/// of codepoints [a, b) is [byte_offset[a], byte_offset[b]).
struct CodepointMap {
  std::vector<char32_t> codepoints;
  std::vector<std::size_t> byte_offset;

  std::size_t size() const { return codepoints.size(); }
};

CodepointMap decode_utf8(std::string_view utf8);

std::string encode_utf8(const std::vector<char32_t>& codepoints);

}  // namespace ghostmark
