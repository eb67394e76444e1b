#include <doctest.h>

#include <random>

#include "mwepara/text.hpp"
#include "test_support.hpp"

using namespace mwepara::text;

TEST_CASE("utf8 round trip and malformed input") {
  const std::string s = "caf\xC3\xA9 \xE2\x80\x94 \xF0\x9F\x93\x96";
  const auto cps = decode_utf8(s);
  CHECK(cps.size() == 8);
  CHECK(cps[3] == U'é');
  CHECK(encode_utf8(cps) == s);
  CHECK(decode_utf8("a\xFF" "b") == U"a�b");
}

TEST_CASE("character classes") {
  CHECK(is_letter(U'a'));
  CHECK(is_letter(U'ç'));
  CHECK_FALSE(is_letter(U'3'));
  CHECK(is_whitespace(U' '));
  CHECK(is_punct_or_symbol(U'\u2014'));
  CHECK(is_punct_or_symbol(U'$'));
  CHECK_FALSE(is_punct_or_symbol(U'x'));
}

TEST_CASE("punctuation tokens") {
  CHECK(is_punctuation_token("..."));
  CHECK(is_punctuation_token("\xE2\x80\x94"));
  CHECK(is_punctuation_token("\xC2\xBF?"));
  CHECK_FALSE(is_punctuation_token(""));
  CHECK_FALSE(is_punctuation_token("a."));
  CHECK_FALSE(is_punctuation_token("42"));
}

TEST_CASE("lowercasing is unicode aware") {
  CHECK(to_lower("\xC3\x89" "COLE Swan") == "\xC3\xA9" "cole swan");
  CHECK(to_lower("ABC") == "abc");
}

TEST_CASE("whitespace helpers") {
  CHECK(split_whitespace("  a \t b\n") == std::vector<std::string>{"a", "b"});
  CHECK(split_whitespace("   ").empty());
  CHECK(normalize_whitespace("  swan \t\n song ") == "swan song");
  CHECK(strip_punctuation("\"Hello!\"") == "Hello");
  CHECK(strip_punctuation("don't") == "don't");
  CHECK(strip_punctuation("--") == "");
}

TEST_CASE("window tokens") {
  CHECK(window_tokens("The \"Old\", red -- car!") ==
        std::vector<std::string>{"the", "old", "red", "car"});
}

TEST_CASE("letter boundaries") {
  const std::string s = "\xC3\xA9t\xC3\xA9 x";
  CHECK(letter_at(s, 0));
  CHECK(letter_before(s, 2));
  CHECK_FALSE(letter_before(s, 0));
  CHECK_FALSE(letter_at(s, s.size()));
  CHECK_FALSE(letter_at(s, 5));
  CHECK(letter_before(s, 5));
}

TEST_CASE("levenshtein") {
  CHECK(levenshtein(U"kitten", U"sitting") == 3);
  CHECK(levenshtein(U"", U"abc") == 3);
  CHECK(levenshtein(U"abc", U"abc") == 0);
  CHECK(levenshtein(U"swan songs", U"swan song") == 1);
  CHECK(levenshtein(U"final performance", U"swan song") == 13);
}

TEST_CASE("normalized edit distance") {
  CHECK(normalized_edit_distance("swan songs", "swan song") == 1.0 / 10.0);
  CHECK(normalized_edit_distance("Swan Song", "swan song") == 0.0);
  CHECK(normalized_edit_distance("", "") == 0.0);
  CHECK(normalized_edit_distance("final performance", "swan song") == 13.0 / 17.0);
  // Code points, not bytes.
  CHECK(normalized_edit_distance("\xC3\xA9t\xC3\xA9", "ete") == 2.0 / 3.0);
}

TEST_CASE("levenshtein agrees with a reference on random strings") {
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> len(0, 9), ch(0, 3);
  for (int trial = 0; trial < 300; ++trial) {
    std::u32string a, b;
    for (int i = len(rng); i > 0; --i) a.push_back(U'a' + ch(rng));
    for (int i = len(rng); i > 0; --i) b.push_back(U'a' + ch(rng));
    REQUIRE(levenshtein(a, b) == testing::edit_distance(a, b));
    REQUIRE(levenshtein(a, b) == levenshtein(b, a));
  }
}
