#pragma once

// Unicode-aware string helpers shared by corpus scanning, candidate
// filtering and mask planning. All strings are UTF-8; malformed sequences
// decode to U+FFFD.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mwepara::text {

std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

bool is_letter(char32_t c);
bool is_whitespace(char32_t c);
// Unicode general categories P* and S*.
bool is_punct_or_symbol(char32_t c);

// True iff `token` is non-empty and every code point is punctuation or a
// symbol.
bool is_punctuation_token(std::string_view token);

std::string to_lower(std::string_view s);
std::string strip_punctuation(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
// Collapses runs of whitespace into one ASCII space and trims both ends.
std::string normalize_whitespace(std::string_view s);

// Whitespace split, punctuation stripped from both ends of each token,
// lowercased; tokens that become empty are dropped.
std::vector<std::string> window_tokens(std::string_view s);

// Whether the code point ending at / starting at byte offset `pos` is a
// letter. Out-of-range positions count as non-letters.
bool letter_before(std::string_view s, std::size_t pos);
bool letter_at(std::string_view s, std::size_t pos);

std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

// Levenshtein over lowercased code points divided by the longer length.
// Two empty strings have distance 0.
double normalized_edit_distance(std::string_view a, std::string_view b);

}  // namespace mwepara::text
