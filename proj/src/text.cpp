#include "mwepara/text.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cstdint>
#include <numeric>

namespace mwepara::text {

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  const auto length = static_cast<int32_t>(s.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    out.push_back(c < 0 ? U'�' : static_cast<char32_t>(c));
  }
  return out;
}

std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : s) {
    uint8_t buf[U8_MAX_LENGTH];
    int32_t n = 0;
    UBool error = false;
    U8_APPEND(buf, n, U8_MAX_LENGTH, static_cast<UChar32>(c), error);
    if (error) {
      out += "\xEF\xBF\xBD";
    } else {
      out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
    }
  }
  return out;
}

bool is_letter(char32_t c) { return u_isalpha(static_cast<UChar32>(c)) != 0; }

bool is_whitespace(char32_t c) { return u_isUWhiteSpace(static_cast<UChar32>(c)) != 0; }

bool is_punct_or_symbol(char32_t c) {
  const auto mask = U_GET_GC_MASK(static_cast<UChar32>(c));
  return (mask & (U_GC_P_MASK | U_GC_S_MASK)) != 0;
}

bool is_punctuation_token(std::string_view token) {
  const auto cps = decode_utf8(token);
  if (cps.empty()) return false;
  return std::all_of(cps.begin(), cps.end(), is_punct_or_symbol);
}

std::string to_lower(std::string_view s) {
  auto cps = decode_utf8(s);
  for (auto& c : cps) c = static_cast<char32_t>(u_tolower(static_cast<UChar32>(c)));
  return encode_utf8(cps);
}

std::string strip_punctuation(std::string_view s) {
  const auto cps = decode_utf8(s);
  std::size_t begin = 0;
  std::size_t end = cps.size();
  while (begin < end && is_punct_or_symbol(cps[begin])) ++begin;
  while (end > begin && is_punct_or_symbol(cps[end - 1])) --end;
  return encode_utf8(std::u32string_view(cps).substr(begin, end - begin));
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::u32string current;
  for (char32_t c : decode_utf8(s)) {
    if (is_whitespace(c)) {
      if (!current.empty()) out.push_back(encode_utf8(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(encode_utf8(current));
  return out;
}

std::string normalize_whitespace(std::string_view s) {
  const auto parts = split_whitespace(s);
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out.push_back(' ');
    out += p;
  }
  return out;
}

std::vector<std::string> window_tokens(std::string_view s) {
  std::vector<std::string> out;
  for (const auto& raw : split_whitespace(s)) {
    auto token = to_lower(strip_punctuation(raw));
    if (!token.empty()) out.push_back(std::move(token));
  }
  return out;
}

bool letter_before(std::string_view s, std::size_t pos) {
  if (pos == 0 || pos > s.size()) return false;
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  auto i = static_cast<int32_t>(pos);
  UChar32 c;
  U8_PREV(bytes, 0, i, c);
  return c >= 0 && is_letter(static_cast<char32_t>(c));
}

bool letter_at(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return false;
  const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
  auto i = static_cast<int32_t>(pos);
  UChar32 c;
  U8_NEXT(bytes, i, static_cast<int32_t>(s.size()), c);
  return c >= 0 && is_letter(static_cast<char32_t>(c));
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 0; i < a.size(); ++i) {
    cur[0] = i + 1;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const std::size_t substitute = prev[j] + (a[i] == b[j] ? 0 : 1);
      cur[j + 1] = std::min({prev[j + 1] + 1, cur[j] + 1, substitute});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double normalized_edit_distance(std::string_view a, std::string_view b) {
  const auto la = decode_utf8(to_lower(a));
  const auto lb = decode_utf8(to_lower(b));
  const std::size_t longest = std::max(la.size(), lb.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(la, lb)) / static_cast<double>(longest);
}

}  // namespace mwepara::text
