#pragma once

// Outer-probability reranking: a candidate is scored by how well the model
// reconstructs masked context words of every cluster member once the
// candidate stands in for the MWE. The masked words are chosen once per
// cluster, so all candidates are scored on the same targets.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mwepara/generation.hpp"
#include "mwepara/mlm_backend.hpp"

namespace mwepara {

enum class MaskStrategy { kAttention, kRandomWords, kRandomConsecutiveSpan, kNone };

std::string_view strategy_name(MaskStrategy strategy);
MaskStrategy strategy_from_name(std::string_view name);

// A context token, addressed relative to the span so the address survives
// replacements of different lengths.
struct ContextPosition {
  enum class Side { kLeft, kRight };
  Side side = Side::kLeft;
  std::size_t index = 0;  // token index within SpanContext::left / right

  auto operator<=>(const ContextPosition&) const = default;
};

struct MaskPlan {
  MaskStrategy strategy = MaskStrategy::kAttention;
  std::uint64_t seed = 0;
  // Per record, every token to mask (all pieces of each chosen word), sorted.
  std::vector<std::vector<ContextPosition>> per_record;

  bool operator==(const MaskPlan&) const = default;
};

struct RerankConfig {
  MaskStrategy strategy = MaskStrategy::kAttention;
  std::size_t mask_words = 5;
  std::uint64_t seed = 0;
  // Attention is read from two masks in place of the MWE; false uses one.
  bool attention_two_masks = true;
};

// A whole word of one context side: its head piece and continuation pieces.
struct ContextWord {
  ContextPosition head;
  std::size_t length = 1;
  bool eligible = false;  // not punctuation, not an orphan continuation piece
};

std::vector<ContextWord> context_words(const SpanContext& ctx);

MaskPlan plan_masks(std::span<const SpanContext> contexts, const MlmBackend& backend,
                    const RerankConfig& config);

// Mean log-probability of the planned tokens over all records, with the
// candidate substituted for the span. An empty plan scores 0.
double outer_score(const Candidate& candidate, std::span<const SpanContext> contexts,
                   const MaskPlan& plan, const MlmBackend& backend);

// "clock clock" -> "clock".
Candidate repair_duplicate_tokens(Candidate candidate);

struct RankedCandidate {
  Candidate candidate;
  double rerank_score = 0.0;
};

struct RerankedSet {
  int cluster_id = 0;
  MaskStrategy strategy = MaskStrategy::kAttention;
  std::uint64_t seed = 0;
  MaskPlan plan;
  std::vector<RankedCandidate> ranked;
};

// Orders by rerank score desc, then gen_score desc, then surface. With
// MaskStrategy::kNone the rerank score is log(gen_score), which reproduces
// generation order.
RerankedSet rerank(const CandidateSet& candidates, std::span<const SpanContext> contexts,
                   const MlmBackend& backend, const RerankConfig& config);

nlohmann::json reranked_to_json(const RerankedSet& set);
RerankedSet reranked_from_json(const nlohmann::json& j);

}  // namespace mwepara
