#pragma once

// A deterministic stand-in for a pretrained masked language model, driven
// entirely by explicit tables so tests can state their oracles directly.
//
// The model is a bag-of-context network:
//   hidden(p)  = slot[ordinal(p)] + sum_{q not a mask} embed[token_q]
//   logits     = output_bias + output_weights * hidden
//   attention  = salience[token_q] / (1 + |p - q|), normalised per mask row
// where ordinal(p) is the index of mask position p among all masks in the
// sequence. Explicit overrides, keyed by the sequence's context key (vocab
// strings joined by spaces, masks as [MASK]), replace the computed hidden
// state, attention row or log-probability for exactly that input.
//
// Fixture file format (one directive per line, lines starting with '#' are
// comments):
//   checkpoint <name>
//   hidden_size <d>
//   max_length <n>
//   special <tok>...                  must include [UNK] and [MASK]
//   vocab <tok>...                    "##x" marks a continuation piece
//   embed <tok> <v1..vd>
//   output <tok> <bias> <w1..wd>
//   slot <ordinal> <v1..vd>
//   salience <tok> <w>
//   hidden <ordinal> <v1..vd> | <context key>
//   attention <ordinal> <w1..wn> | <context key>
//   logprob <position> <target tok> <value> | <context key>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mwepara/mlm_backend.hpp"

namespace mwepara {

struct OutputRow {
  double bias = 0.0;
  std::vector<double> weights;  // empty = zero row
};

struct MockTables {
  std::string checkpoint = "mock-mlm";
  std::size_t hidden_size = 0;
  std::size_t max_length = 512;
  std::vector<std::string> specials = {"[UNK]", "[MASK]"};
  std::vector<std::string> vocab;

  std::map<std::string, std::vector<double>> embeddings;
  std::map<std::string, OutputRow> output;
  std::map<std::size_t, std::vector<double>> slots;
  std::map<std::string, double> salience;  // default 1.0

  std::map<std::pair<std::string, std::size_t>, std::vector<double>> hidden_overrides;
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> attention_overrides;
  std::map<std::tuple<std::string, std::size_t, std::string>, double> logprob_overrides;
};

MockTables parse_mock_fixture(std::istream& in);
MockTables load_mock_fixture(const std::filesystem::path& path);

class MockBackend : public MlmBackend {
 public:
  explicit MockBackend(MockTables tables);

  const BackendInfo& info() const override { return info_; }
  TokenSeq tokenize(std::string_view text) const override;
  std::vector<MaskEmbedding> mask_hidden_states(const TokenSeq& tokens) const override;
  TopKDistribution apply_output_head(std::span<const double> vector,
                                     std::size_t k) const override;
  std::vector<double> token_log_probs(const TokenSeq& tokens,
                                      std::span<const std::size_t> mask_positions,
                                      std::span<const TokenId> targets) const override;
  AttentionProfile attention_to_masks(const TokenSeq& tokens) const override;

  std::string context_key(std::span<const TokenId> ids) const;
  TokenId id_of(std::string_view token) const;
  const std::string& token_string(TokenId id) const;
  const MockTables& tables() const { return tables_; }

  // Full-vocabulary logits for a hidden vector.
  std::vector<double> logits(std::span<const double> hidden) const;

 private:
  std::vector<double> hidden_at(std::span<const TokenId> ids, std::size_t ordinal,
                                const std::string& key) const;
  void check_ids(std::span<const TokenId> ids) const;
  void tokenize_word(const std::string& word, TokenSeq& out) const;

  MockTables tables_;
  BackendInfo info_;
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<bool> special_;
  std::vector<bool> subword_;
  std::vector<std::vector<double>> embed_by_id_;
  std::vector<OutputRow> output_by_id_;
  std::vector<double> salience_by_id_;
  TokenId unk_id_ = 0;
};

}  // namespace mwepara
