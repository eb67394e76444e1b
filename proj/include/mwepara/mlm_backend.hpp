#pragma once

// The narrow masked-language-model contract the paraphrasing pipeline is
// written against. A backend answers single-sentence queries only; anything
// that aggregates across sentences (e.g. averaging mask states over a
// cluster) happens in the caller, on top of mask_hidden_states and
// apply_output_head.
//
// Token sequences never include model-specific framing tokens such as
// [CLS]/[SEP]; backends add those internally. Mask placeholders are tokens
// whose id equals BackendInfo::mask_id.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mwepara/span.hpp"

namespace mwepara {

using TokenId = std::int32_t;

struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::string> surfaces;  // continuation pieces carry no marker
  std::vector<bool> is_subword;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  void push_back(TokenId id, std::string surface, bool subword);
  void append(const TokenSeq& other);
  TokenSeq slice(std::size_t begin, std::size_t end) const;
  bool consistent() const;

  bool operator==(const TokenSeq&) const = default;
};

// Hidden vector at a mask position, taken as the input to the output head.
struct MaskEmbedding {
  std::vector<float> values;

  std::size_t size() const { return values.size(); }
  std::vector<double> as_double() const { return {values.begin(), values.end()}; }
  bool operator==(const MaskEmbedding&) const = default;
};

struct TopKEntry {
  TokenId id = 0;
  std::string surface;
  double probability = 0.0;
  bool is_subword = false;
  bool is_special = false;
};

// Entries descend by probability, ties by ascending token id.
struct TopKDistribution {
  std::vector<TopKEntry> entries;
  double total_probability = 0.0;  // full-vocabulary sum reported by the backend
};

struct AttentionProfile {
  std::vector<double> weights;  // one per input position
};

struct BackendInfo {
  std::string checkpoint;
  std::size_t hidden_size = 0;
  std::size_t vocab_size = 0;
  std::size_t max_length = 512;
  TokenId mask_id = 0;
  std::string mask_token = "[MASK]";
};

// Implementations must be safe to call concurrently through a const
// reference.
class MlmBackend {
 public:
  virtual ~MlmBackend() = default;

  virtual const BackendInfo& info() const = 0;

  virtual TokenSeq tokenize(std::string_view text) const = 0;

  // One vector per mask placeholder, in position order.
  virtual std::vector<MaskEmbedding> mask_hidden_states(const TokenSeq& tokens) const = 0;

  // Top-k of softmax(head(vector)). Accepts any vector of hidden size,
  // including caller-side averages of mask states.
  virtual TopKDistribution apply_output_head(std::span<const double> vector,
                                             std::size_t k) const = 0;

  // log P(targets[i] at mask_positions[i] | tokens), all from one forward
  // pass over `tokens`.
  virtual std::vector<double> token_log_probs(const TokenSeq& tokens,
                                              std::span<const std::size_t> mask_positions,
                                              std::span<const TokenId> targets) const = 0;

  // Last-layer attention from the mask position(s) to every position,
  // averaged over heads and mask positions.
  virtual AttentionProfile attention_to_masks(const TokenSeq& tokens) const = 0;
};

std::vector<std::size_t> find_mask_positions(const TokenSeq& tokens, TokenId mask_id);

TokenSeq make_masks(const BackendInfo& info, std::size_t count);

// Joins surfaces with single spaces, gluing continuation pieces to the
// preceding token.
std::string detokenize(const TokenSeq& tokens);

// A sentence tokenized on either side of an MWE span. Both sides are
// truncated symmetrically around the span so that left + replacement +
// right fits the backend's max_length for replacements of up to
// `max_replacement` tokens. Every stage builds its inputs from the same
// SpanContext, so context tokens stay identical whatever fills the span.
struct SpanContext {
  TokenSeq left;
  TokenSeq right;

  TokenSeq with(const TokenSeq& replacement) const;
  std::size_t replacement_begin() const { return left.size(); }
};

SpanContext tokenize_context(const MlmBackend& backend, std::string_view text, Span span,
                             std::size_t max_replacement = 2);

}  // namespace mwepara
