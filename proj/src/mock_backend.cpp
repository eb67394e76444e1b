#include "mwepara/mock_backend.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

#include "mwepara/error.hpp"
#include "mwepara/text.hpp"

namespace mwepara {

namespace {

constexpr std::string_view kContinuation = "##";

bool is_continuation(std::string_view token) {
  return token.size() > kContinuation.size() && token.starts_with(kContinuation);
}

std::string bare_surface(std::string_view token) {
  return std::string(is_continuation(token) ? token.substr(kContinuation.size()) : token);
}

double parse_double(std::string_view s, std::size_t line_no) {
  double value = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kInvalidInput,
                "fixture line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return value;
}

std::size_t parse_count(std::string_view s, std::size_t line_no) {
  std::size_t value = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kInvalidInput,
                "fixture line " + std::to_string(line_no) + ": bad count '" + std::string(s) + "'");
  }
  return value;
}

std::vector<double> parse_doubles(const std::vector<std::string>& words, std::size_t from,
                                  std::size_t line_no) {
  std::vector<double> out;
  for (std::size_t i = from; i < words.size(); ++i) out.push_back(parse_double(words[i], line_no));
  return out;
}

void require_dim(const std::vector<double>& v, std::size_t d, const std::string& what) {
  if (v.size() != d) {
    throw Error(ErrorCode::kInvalidInput, what + " has " + std::to_string(v.size()) +
                                              " components, hidden_size is " + std::to_string(d));
  }
}

}  // namespace

MockTables parse_mock_fixture(std::istream& in) {
  MockTables tables;
  bool specials_declared = false;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (const auto first = line.find_first_not_of(" \t");
        first == std::string::npos || line[first] == '#') {
      continue;
    }
    std::string key;
    if (const auto bar = line.find(" | "); bar != std::string::npos) {
      key = text::normalize_whitespace(std::string_view(line).substr(bar + 3));
      line.erase(bar);
    }
    const auto words = text::split_whitespace(line);
    if (words.empty()) continue;
    const std::string& directive = words[0];
    auto need = [&](std::size_t n) {
      if (words.size() < n) {
        throw Error(ErrorCode::kInvalidInput,
                    "fixture line " + std::to_string(line_no) + ": '" + directive +
                        "' needs at least " + std::to_string(n - 1) + " arguments");
      }
    };
    auto need_key = [&] {
      if (key.empty()) {
        throw Error(ErrorCode::kInvalidInput,
                    "fixture line " + std::to_string(line_no) + ": missing '| <context key>'");
      }
    };

    if (directive == "checkpoint") {
      need(2);
      tables.checkpoint = words[1];
    } else if (directive == "hidden_size") {
      need(2);
      tables.hidden_size = parse_count(words[1], line_no);
    } else if (directive == "max_length") {
      need(2);
      tables.max_length = parse_count(words[1], line_no);
    } else if (directive == "special") {
      need(2);
      if (!specials_declared) tables.specials.clear();
      specials_declared = true;
      tables.specials.insert(tables.specials.end(), words.begin() + 1, words.end());
    } else if (directive == "vocab") {
      tables.vocab.insert(tables.vocab.end(), words.begin() + 1, words.end());
    } else if (directive == "embed") {
      need(3);
      tables.embeddings[words[1]] = parse_doubles(words, 2, line_no);
    } else if (directive == "output") {
      need(3);
      OutputRow row;
      row.bias = parse_double(words[2], line_no);
      row.weights = parse_doubles(words, 3, line_no);
      tables.output[words[1]] = std::move(row);
    } else if (directive == "slot") {
      need(3);
      tables.slots[parse_count(words[1], line_no)] = parse_doubles(words, 2, line_no);
    } else if (directive == "salience") {
      need(3);
      tables.salience[words[1]] = parse_double(words[2], line_no);
    } else if (directive == "hidden") {
      need(3);
      need_key();
      tables.hidden_overrides[{key, parse_count(words[1], line_no)}] =
          parse_doubles(words, 2, line_no);
    } else if (directive == "attention") {
      need(3);
      need_key();
      tables.attention_overrides[{key, parse_count(words[1], line_no)}] =
          parse_doubles(words, 2, line_no);
    } else if (directive == "logprob") {
      need(4);
      need_key();
      tables.logprob_overrides[{key, parse_count(words[1], line_no), words[2]}] =
          parse_double(words[3], line_no);
    } else {
      throw Error(ErrorCode::kInvalidInput,
                  "fixture line " + std::to_string(line_no) + ": unknown directive '" +
                      directive + "'");
    }
  }
  return tables;
}

MockTables load_mock_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open fixture " + path.string());
  return parse_mock_fixture(in);
}

MockBackend::MockBackend(MockTables tables) : tables_(std::move(tables)) {
  const std::size_t d = tables_.hidden_size;
  if (d == 0) throw Error(ErrorCode::kInvalidInput, "mock hidden_size must be positive");

  auto add = [&](const std::string& token, bool special) {
    if (token_to_id_.contains(token)) {
      throw Error(ErrorCode::kInvalidInput, "duplicate vocabulary entry '" + token + "'");
    }
    const auto id = static_cast<TokenId>(id_to_token_.size());
    token_to_id_.emplace(token, id);
    id_to_token_.push_back(token);
    special_.push_back(special);
    subword_.push_back(!special && is_continuation(token));
  };
  for (const auto& s : tables_.specials) add(s, true);
  for (const auto& v : tables_.vocab) add(v, false);
  if (!token_to_id_.contains("[UNK]") || !token_to_id_.contains("[MASK]")) {
    throw Error(ErrorCode::kInvalidInput, "mock vocabulary must contain [UNK] and [MASK]");
  }
  unk_id_ = token_to_id_.at("[UNK]");

  const std::size_t vocab_size = id_to_token_.size();
  embed_by_id_.assign(vocab_size, std::vector<double>(d, 0.0));
  output_by_id_.assign(vocab_size, OutputRow{});
  salience_by_id_.assign(vocab_size, 1.0);
  for (const auto& [token, vec] : tables_.embeddings) {
    require_dim(vec, d, "embedding of '" + token + "'");
    embed_by_id_[static_cast<std::size_t>(id_of(token))] = vec;
  }
  for (const auto& [token, row] : tables_.output) {
    if (!row.weights.empty()) require_dim(row.weights, d, "output row of '" + token + "'");
    output_by_id_[static_cast<std::size_t>(id_of(token))] = row;
  }
  for (const auto& [token, w] : tables_.salience) {
    if (!(w >= 0.0)) throw Error(ErrorCode::kInvalidInput, "salience must be >= 0");
    salience_by_id_[static_cast<std::size_t>(id_of(token))] = w;
  }
  for (const auto& [ordinal, vec] : tables_.slots) {
    require_dim(vec, d, "slot " + std::to_string(ordinal));
  }
  for (const auto& [k, vec] : tables_.hidden_overrides) {
    require_dim(vec, d, "hidden override '" + k.first + "'");
  }
  for (const auto& [k, value] : tables_.logprob_overrides) {
    if (!(value <= 0.0)) {
      throw Error(ErrorCode::kInvalidInput, "log-probability override must be <= 0");
    }
    id_of(std::get<2>(k));
  }

  info_.checkpoint = tables_.checkpoint;
  info_.hidden_size = d;
  info_.vocab_size = vocab_size;
  info_.max_length = tables_.max_length;
  info_.mask_id = token_to_id_.at("[MASK]");
  info_.mask_token = "[MASK]";
}

TokenId MockBackend::id_of(std::string_view token) const {
  const auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) {
    throw Error(ErrorCode::kInvalidInput, "token '" + std::string(token) + "' not in vocabulary");
  }
  return it->second;
}

const std::string& MockBackend::token_string(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw Error(ErrorCode::kInvalidInput, "token id " + std::to_string(id) + " out of range");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

void MockBackend::check_ids(std::span<const TokenId> ids) const {
  for (TokenId id : ids) token_string(id);
  if (ids.size() > info_.max_length) {
    throw Error(ErrorCode::kInvalidInput, "input of " + std::to_string(ids.size()) +
                                              " tokens exceeds max_length");
  }
}

std::string MockBackend::context_key(std::span<const TokenId> ids) const {
  std::string key;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) key.push_back(' ');
    key += token_string(ids[i]);
  }
  return key;
}

void MockBackend::tokenize_word(const std::string& word, TokenSeq& out) const {
  const auto cps = text::decode_utf8(word);
  TokenSeq pieces;
  std::size_t start = 0;
  while (start < cps.size()) {
    std::size_t end = cps.size();
    TokenId found = -1;
    for (; end > start; --end) {
      std::string candidate = text::encode_utf8(std::u32string_view(cps).substr(start, end - start));
      if (start > 0) candidate.insert(0, kContinuation);
      if (const auto it = token_to_id_.find(candidate);
          it != token_to_id_.end() && !special_[static_cast<std::size_t>(it->second)]) {
        found = it->second;
        break;
      }
    }
    if (found < 0) {
      out.push_back(unk_id_, "[UNK]", false);
      return;
    }
    pieces.push_back(found, bare_surface(token_string(found)), start > 0);
    start = end;
  }
  out.append(pieces);
}

TokenSeq MockBackend::tokenize(std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::kInvalidInput, "cannot tokenize empty text");
  TokenSeq out;
  for (const auto& raw : text::split_whitespace(text)) {
    if (const auto it = token_to_id_.find(raw);
        it != token_to_id_.end() && special_[static_cast<std::size_t>(it->second)]) {
      out.push_back(it->second, raw, false);
      continue;
    }
    std::u32string word;
    auto flush = [&] {
      if (!word.empty()) tokenize_word(text::encode_utf8(word), out);
      word.clear();
    };
    for (char32_t c : text::decode_utf8(text::to_lower(raw))) {
      if (text::is_punct_or_symbol(c)) {
        flush();
        tokenize_word(text::encode_utf8(std::u32string(1, c)), out);
      } else {
        word.push_back(c);
      }
    }
    flush();
  }
  return out;
}

std::vector<double> MockBackend::hidden_at(std::span<const TokenId> ids, std::size_t ordinal,
                                           const std::string& key) const {
  std::vector<double> h;
  if (const auto it = tables_.hidden_overrides.find({key, ordinal});
      it != tables_.hidden_overrides.end()) {
    h = it->second;
  } else {
    const auto slot = tables_.slots.find(ordinal);
    h = slot != tables_.slots.end() ? slot->second : std::vector<double>(info_.hidden_size, 0.0);
    for (TokenId id : ids) {
      if (id == info_.mask_id) continue;
      const auto& e = embed_by_id_[static_cast<std::size_t>(id)];
      for (std::size_t j = 0; j < h.size(); ++j) h[j] += e[j];
    }
  }
  // Hidden states are single precision, as a real model's would be.
  for (auto& v : h) v = static_cast<double>(static_cast<float>(v));
  return h;
}

std::vector<MaskEmbedding> MockBackend::mask_hidden_states(const TokenSeq& tokens) const {
  check_ids(tokens.ids);
  const auto masks = find_mask_positions(tokens, info_.mask_id);
  if (masks.empty()) throw Error(ErrorCode::kInvalidInput, "no mask placeholder in input");
  const auto key = context_key(tokens.ids);
  std::vector<MaskEmbedding> out;
  for (std::size_t ordinal = 0; ordinal < masks.size(); ++ordinal) {
    const auto h = hidden_at(tokens.ids, ordinal, key);
    out.push_back(MaskEmbedding{{h.begin(), h.end()}});
  }
  return out;
}

std::vector<double> MockBackend::logits(std::span<const double> hidden) const {
  if (hidden.size() != info_.hidden_size) {
    throw Error(ErrorCode::kDimensionMismatch,
                "vector has " + std::to_string(hidden.size()) + " components, expected " +
                    std::to_string(info_.hidden_size));
  }
  std::vector<double> out(output_by_id_.size());
  for (std::size_t t = 0; t < output_by_id_.size(); ++t) {
    const auto& row = output_by_id_[t];
    double z = row.bias;
    for (std::size_t j = 0; j < row.weights.size(); ++j) z += row.weights[j] * hidden[j];
    out[t] = z;
  }
  return out;
}

namespace {

// log-sum-exp with max shift.
double log_normalizer(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - m);
  return m + std::log(sum);
}

}  // namespace

TopKDistribution MockBackend::apply_output_head(std::span<const double> vector,
                                                std::size_t k) const {
  if (k == 0) throw Error(ErrorCode::kInvalidInput, "k must be positive");
  const auto z = logits(vector);
  const double norm = log_normalizer(z);
  std::vector<double> probs(z.size());
  double total = 0.0;
  for (std::size_t t = 0; t < z.size(); ++t) {
    probs[t] = std::exp(z[t] - norm);
    total += probs[t];
  }
  std::vector<std::size_t> order(z.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t n = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (probs[a] != probs[b]) return probs[a] > probs[b];
                      return a < b;
                    });
  TopKDistribution out;
  out.total_probability = total;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t t = order[i];
    out.entries.push_back(TopKEntry{static_cast<TokenId>(t), bare_surface(id_to_token_[t]),
                                    probs[t], subword_[t], special_[t]});
  }
  return out;
}

std::vector<double> MockBackend::token_log_probs(const TokenSeq& tokens,
                                                 std::span<const std::size_t> mask_positions,
                                                 std::span<const TokenId> targets) const {
  check_ids(tokens.ids);
  check_ids(targets);
  if (mask_positions.size() != targets.size()) {
    throw Error(ErrorCode::kInvalidInput, "mask_positions and targets differ in length");
  }
  const auto masks = find_mask_positions(tokens, info_.mask_id);
  const auto key = context_key(tokens.ids);
  std::vector<double> out;
  out.reserve(targets.size());
  for (std::size_t i = 0; i < mask_positions.size(); ++i) {
    const std::size_t pos = mask_positions[i];
    const auto it = std::lower_bound(masks.begin(), masks.end(), pos);
    if (it == masks.end() || *it != pos) {
      throw Error(ErrorCode::kInvalidInput, "position " + std::to_string(pos) + " is not a mask");
    }
    const std::string& target = token_string(targets[i]);
    if (const auto ov = tables_.logprob_overrides.find({key, pos, target});
        ov != tables_.logprob_overrides.end()) {
      out.push_back(ov->second);
      continue;
    }
    const auto ordinal = static_cast<std::size_t>(it - masks.begin());
    const auto z = logits(hidden_at(tokens.ids, ordinal, key));
    out.push_back(std::min(0.0, z[static_cast<std::size_t>(targets[i])] - log_normalizer(z)));
  }
  return out;
}

AttentionProfile MockBackend::attention_to_masks(const TokenSeq& tokens) const {
  check_ids(tokens.ids);
  const auto masks = find_mask_positions(tokens, info_.mask_id);
  if (masks.empty()) throw Error(ErrorCode::kInvalidInput, "no mask placeholder in input");
  const auto key = context_key(tokens.ids);
  const std::size_t n = tokens.size();
  std::vector<double> sum(n, 0.0);
  for (std::size_t ordinal = 0; ordinal < masks.size(); ++ordinal) {
    std::vector<double> row;
    if (const auto it = tables_.attention_overrides.find({key, ordinal});
        it != tables_.attention_overrides.end()) {
      row = it->second;
      if (row.size() != n) {
        throw Error(ErrorCode::kBackendError, "attention override for '" + key +
                                                  "' has wrong length");
      }
    } else {
      row.assign(n, 0.0);
      const std::size_t p = masks[ordinal];
      double total = 0.0;
      for (std::size_t q = 0; q < n; ++q) {
        if (tokens.ids[q] == info_.mask_id) continue;
        const double dist = p > q ? static_cast<double>(p - q) : static_cast<double>(q - p);
        row[q] = salience_by_id_[static_cast<std::size_t>(tokens.ids[q])] / (1.0 + dist);
        total += row[q];
      }
      if (total > 0.0) {
        for (auto& w : row) w /= total;
      }
    }
    for (std::size_t q = 0; q < n; ++q) sum[q] += row[q];
  }
  for (auto& w : sum) w /= static_cast<double>(masks.size());
  return AttentionProfile{std::move(sum)};
}

}  // namespace mwepara
