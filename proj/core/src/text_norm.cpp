#include "ghostmark/text_norm.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "ghostmark/errors.hpp"

namespace ghostmark {

namespace {

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* instance = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || instance == nullptr) {
    throw Error("ICU NFC normalizer unavailable");
  }
  return *instance;
}

void require_valid_utf8(std::string_view utf8) {
  const auto* bytes = reinterpret_cast<const uint8_t*>(utf8.data());
  int32_t length = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 cp;
    U8_NEXT(bytes, i, length, cp);
    if (cp < 0) {
      throw ParseError("text is not valid UTF-8");
    }
  }
}

std::string compose_nfc(std::string_view utf8) {
  // fromUTF8 would silently substitute U+FFFD; validate first instead.
  require_valid_utf8(utf8);
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString composed = nfc().normalize(text, status);
  if (U_FAILURE(status)) {
    throw ParseError("text is not valid UTF-8 or cannot be normalized");
  }
  std::string out;
  composed.toUTF8String(out);
  return out;
}

std::string collapse_whitespace(std::string_view utf8) {
  std::string out;
  out.reserve(utf8.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(utf8.data());
  int32_t length = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  bool pending_space = false;
  while (i < length) {
    UChar32 cp;
    int32_t start = i;
    U8_NEXT(bytes, i, length, cp);
    if (cp < 0) {
      throw ParseError("text is not valid UTF-8");
    }
    if (u_isUWhiteSpace(cp)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.append(utf8.substr(static_cast<std::size_t>(start),
                           static_cast<std::size_t>(i - start)));
  }
  return out;
}

}  // namespace

std::string normalize_text(std::string_view utf8) {
  return collapse_whitespace(compose_nfc(utf8));
}

char32_t fold_codepoint(char32_t cp) {
  return static_cast<char32_t>(
      u_foldCase(static_cast<UChar32>(cp), U_FOLD_CASE_DEFAULT));
}

std::string normalize_casefold(std::string_view utf8) {
  CodepointMap map = decode_utf8(normalize_text(utf8));
  for (char32_t& cp : map.codepoints) cp = fold_codepoint(cp);
  return encode_utf8(map.codepoints);
}

bool is_word_char(char32_t cp) {
  return cp == U'\'' || u_isalpha(static_cast<UChar32>(cp)) ||
         u_isdigit(static_cast<UChar32>(cp));
}

CodepointMap decode_utf8(std::string_view utf8) {
  CodepointMap map;
  map.codepoints.reserve(utf8.size());
  map.byte_offset.reserve(utf8.size() + 1);
  const auto* bytes = reinterpret_cast<const uint8_t*>(utf8.data());
  int32_t length = static_cast<int32_t>(utf8.size());
  int32_t i = 0;
  while (i < length) {
    map.byte_offset.push_back(static_cast<std::size_t>(i));
    UChar32 cp;
    U8_NEXT(bytes, i, length, cp);
    if (cp < 0) {
      throw ParseError("text is not valid UTF-8");
    }
    map.codepoints.push_back(static_cast<char32_t>(cp));
  }
  map.byte_offset.push_back(static_cast<std::size_t>(length));
  return map;
}

std::string encode_utf8(const std::vector<char32_t>& codepoints) {
  std::string out;
  out.reserve(codepoints.size());
  for (char32_t cp : codepoints) {
    uint8_t buf[U8_MAX_LENGTH];
    int32_t offset = 0;
    UBool error = false;
    U8_APPEND(buf, offset, U8_MAX_LENGTH, static_cast<UChar32>(cp), error);
    if (error) {
      throw Error("invalid codepoint during UTF-8 encoding");
    }
    out.append(reinterpret_cast<const char*>(buf),
               static_cast<std::size_t>(offset));
  }
  return out;
}

}  // namespace ghostmark
