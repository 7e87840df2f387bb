#pragma once

#include <string>
#include <string_view>

namespace mbti::unicode {

/// Decodes UTF-8; malformed sequences become U+FFFD.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view text);
void append(std::string& out, char32_t cp);

/// Letter test covering Latin, Greek, Cyrillic, Armenian, Hebrew, Arabic,
/// Devanagari, Thai, Hangul, kana and CJK ideograph blocks.
bool is_letter(char32_t cp);
bool is_digit(char32_t cp);
bool is_space(char32_t cp);
bool is_punct(char32_t cp);

/// Simple (1:1) lowercase mapping for the scripts above.
char32_t to_lower(char32_t cp);

/// Base letter for precomposed Latin letters with diacritics
/// ("é" -> "e"); identity elsewhere.
char32_t strip_accent(char32_t cp);

} // namespace mbti::unicode
