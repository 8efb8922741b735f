#pragma once

// UTF-8 <-> code point conversion and the small set of character classes the
// recognizers need. All offsets in this project count Unicode scalar values.

#include <string>
#include <string_view>

namespace deid {

std::u32string utf8_to_u32(std::string_view utf8);
std::string u32_to_utf8(std::u32string_view text);

/// Number of code points in a UTF-8 string.
std::size_t utf8_length(std::string_view utf8);

/// Simple one-to-one case folding (ASCII, Latin-1, Latin Extended-A, Greek,
/// Cyrillic). Anything else folds to itself.
char32_t fold_case(char32_t c);
std::u32string fold_case(std::u32string_view text);
std::string fold_case_utf8(std::string_view utf8);

/// Alphanumeric in the word-boundary sense: ASCII letters/digits and any
/// letter-like code point above U+00BF that is not punctuation or a symbol.
bool is_word_char(char32_t c);
bool is_space(char32_t c);
bool is_digit(char32_t c);
bool is_upper(char32_t c);

}  // namespace deid
