#include "mwepara/reranking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "mwepara/error.hpp"
#include "mwepara/text.hpp"

namespace mwepara {

std::string_view strategy_name(MaskStrategy strategy) {
  switch (strategy) {
    case MaskStrategy::kAttention: return "attention";
    case MaskStrategy::kRandomWords: return "random_words";
    case MaskStrategy::kRandomConsecutiveSpan: return "random_consecutive_span";
    case MaskStrategy::kNone: return "none";
  }
  return "attention";
}

MaskStrategy strategy_from_name(std::string_view name) {
  for (auto s : {MaskStrategy::kAttention, MaskStrategy::kRandomWords,
                 MaskStrategy::kRandomConsecutiveSpan, MaskStrategy::kNone}) {
    if (strategy_name(s) == name) return s;
  }
  throw Error(ErrorCode::kInvalidInput, "unknown mask strategy '" + std::string(name) + "'");
}

namespace {

using Side = ContextPosition::Side;

void collect_words(const TokenSeq& seq, Side side, std::vector<ContextWord>& out) {
  std::size_t i = 0;
  while (i < seq.size()) {
    ContextWord word;
    word.head = ContextPosition{side, i};
    const bool orphan = seq.is_subword[i];
    std::string surface = seq.surfaces[i];
    std::size_t j = i + 1;
    while (j < seq.size() && seq.is_subword[j]) surface += seq.surfaces[j++];
    word.length = j - i;
    word.eligible = !orphan && !text::is_punctuation_token(surface);
    out.push_back(word);
    i = j;
  }
}

std::size_t absolute(const ContextPosition& p, const SpanContext& ctx, std::size_t replacement) {
  return p.side == Side::kLeft ? p.index : ctx.left.size() + replacement + p.index;
}

void expand_words(std::span<const ContextWord> chosen, std::vector<ContextPosition>& out) {
  for (const auto& w : chosen) {
    for (std::size_t k = 0; k < w.length; ++k) {
      out.push_back(ContextPosition{w.head.side, w.head.index + k});
    }
  }
  std::sort(out.begin(), out.end());
}

// Per-record generator, independent of how many records precede it.
std::mt19937_64 record_rng(std::uint64_t seed, std::size_t record) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(record)};
  return std::mt19937_64(seq);
}

// Uniform draw in [0, n) that does not depend on the standard library's
// distribution implementation.
std::size_t draw(std::mt19937_64& rng, std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

std::vector<ContextPosition> plan_attention(const SpanContext& ctx, const MlmBackend& backend,
                                            const RerankConfig& config) {
  const std::size_t n_masks = config.attention_two_masks ? 2 : 1;
  const auto profile = backend.attention_to_masks(ctx.with(make_masks(backend.info(), n_masks)));
  std::vector<ContextWord> words;
  for (const auto& w : context_words(ctx)) {
    if (w.eligible) words.push_back(w);
  }
  auto weight = [&](const ContextWord& w) {
    return profile.weights.at(absolute(w.head, ctx, n_masks));
  };
  std::stable_sort(words.begin(), words.end(), [&](const ContextWord& a, const ContextWord& b) {
    return weight(a) > weight(b);
  });
  if (words.size() > config.mask_words) words.resize(config.mask_words);
  std::vector<ContextPosition> out;
  expand_words(words, out);
  return out;
}

std::vector<ContextPosition> plan_random_words(const SpanContext& ctx, std::size_t record,
                                               const RerankConfig& config) {
  std::vector<ContextWord> words;
  for (const auto& w : context_words(ctx)) {
    if (w.eligible) words.push_back(w);
  }
  auto rng = record_rng(config.seed, record);
  const std::size_t take = std::min(config.mask_words, words.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::swap(words[i], words[i + draw(rng, words.size() - i)]);
  }
  words.resize(take);
  std::vector<ContextPosition> out;
  expand_words(words, out);
  return out;
}

std::vector<ContextPosition> plan_consecutive(const SpanContext& ctx, std::size_t record,
                                              const RerankConfig& config) {
  std::vector<ContextWord> left, right;
  for (const auto& w : context_words(ctx)) {
    if (!w.eligible) continue;
    (w.head.side == Side::kLeft ? left : right).push_back(w);
  }
  // Windows never straddle the span; if neither side is long enough the
  // window shrinks to the longer side.
  const std::size_t width =
      std::min(config.mask_words, std::max(left.size(), right.size()));
  if (width == 0) return {};
  std::vector<std::pair<const std::vector<ContextWord>*, std::size_t>> windows;
  for (const auto* side : {&left, &right}) {
    if (side->size() < width) continue;
    for (std::size_t start = 0; start + width <= side->size(); ++start) {
      windows.emplace_back(side, start);
    }
  }
  auto rng = record_rng(config.seed, record);
  const auto [side, start] = windows[draw(rng, windows.size())];
  std::vector<ContextPosition> out;
  expand_words(std::span(*side).subspan(start, width), out);
  return out;
}

}  // namespace

std::vector<ContextWord> context_words(const SpanContext& ctx) {
  std::vector<ContextWord> out;
  collect_words(ctx.left, Side::kLeft, out);
  collect_words(ctx.right, Side::kRight, out);
  return out;
}

MaskPlan plan_masks(std::span<const SpanContext> contexts, const MlmBackend& backend,
                    const RerankConfig& config) {
  MaskPlan plan;
  plan.strategy = config.strategy;
  plan.seed = config.seed;
  plan.per_record.reserve(contexts.size());
  for (std::size_t r = 0; r < contexts.size(); ++r) {
    switch (config.strategy) {
      case MaskStrategy::kAttention:
        plan.per_record.push_back(plan_attention(contexts[r], backend, config));
        break;
      case MaskStrategy::kRandomWords:
        plan.per_record.push_back(plan_random_words(contexts[r], r, config));
        break;
      case MaskStrategy::kRandomConsecutiveSpan:
        plan.per_record.push_back(plan_consecutive(contexts[r], r, config));
        break;
      case MaskStrategy::kNone:
        plan.per_record.emplace_back();
        break;
    }
  }
  return plan;
}

double outer_score(const Candidate& candidate, std::span<const SpanContext> contexts,
                   const MaskPlan& plan, const MlmBackend& backend) {
  if (plan.per_record.size() != contexts.size()) {
    throw Error(ErrorCode::kInvalidInput, "mask plan does not match the cluster");
  }
  TokenSeq replacement;
  for (TokenId id : candidate.token_ids) replacement.push_back(id, "", false);
  const TokenId mask_id = backend.info().mask_id;

  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < contexts.size(); ++r) {
    const auto& planned = plan.per_record[r];
    if (planned.empty()) continue;
    TokenSeq seq = contexts[r].with(replacement);
    std::vector<std::size_t> positions;
    std::vector<TokenId> targets;
    for (const auto& p : planned) {
      const std::size_t pos = absolute(p, contexts[r], replacement.size());
      if (pos >= seq.size()) throw Error(ErrorCode::kInvalidInput, "planned position out of range");
      positions.push_back(pos);
      targets.push_back(seq.ids[pos]);
      seq.ids[pos] = mask_id;
      seq.surfaces[pos] = backend.info().mask_token;
    }
    for (double lp : backend.token_log_probs(seq, positions, targets)) {
      total += lp;
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

Candidate repair_duplicate_tokens(Candidate candidate) {
  if (candidate.token_ids.size() != 2) return candidate;
  const auto words = text::split_whitespace(candidate.surface);
  if (words.size() == 2 && words[0] == words[1]) {
    candidate.token_ids.resize(1);
    candidate.surface = words[0];
  }
  return candidate;
}

RerankedSet rerank(const CandidateSet& candidates, std::span<const SpanContext> contexts,
                   const MlmBackend& backend, const RerankConfig& config) {
  if (candidates.candidates.empty()) {
    throw Error(ErrorCode::kInvalidInput, "nothing to rerank");
  }
  RerankedSet out;
  out.cluster_id = candidates.cluster_id;
  out.strategy = config.strategy;
  out.seed = config.seed;

  // Repair first, then merge any surfaces the repair made identical.
  std::vector<Candidate> repaired;
  std::map<std::string, std::size_t> index;
  for (const auto& c : candidates.candidates) {
    auto fixed = repair_duplicate_tokens(c);
    const auto [it, inserted] = index.emplace(fixed.surface, repaired.size());
    if (inserted) {
      repaired.push_back(std::move(fixed));
    } else if (fixed.gen_score > repaired[it->second].gen_score) {
      repaired[it->second] = std::move(fixed);
    }
  }

  if (config.strategy != MaskStrategy::kNone) {
    out.plan = plan_masks(contexts, backend, config);
  } else {
    out.plan.strategy = MaskStrategy::kNone;
    out.plan.seed = config.seed;
  }
  for (auto& c : repaired) {
    const double score = config.strategy == MaskStrategy::kNone
                             ? std::log(c.gen_score)
                             : outer_score(c, contexts, out.plan, backend);
    out.ranked.push_back(RankedCandidate{std::move(c), score});
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) {
                     if (a.rerank_score != b.rerank_score) return a.rerank_score > b.rerank_score;
                     if (a.candidate.gen_score != b.candidate.gen_score) {
                       return a.candidate.gen_score > b.candidate.gen_score;
                     }
                     return a.candidate.surface < b.candidate.surface;
                   });
  return out;
}

nlohmann::json reranked_to_json(const RerankedSet& set) {
  nlohmann::json ranked = nlohmann::json::array();
  for (const auto& r : set.ranked) {
    auto j = candidate_to_json(r.candidate);
    j["rerank_score"] = r.rerank_score;
    ranked.push_back(std::move(j));
  }
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& rec : set.plan.per_record) {
    nlohmann::json positions = nlohmann::json::array();
    for (const auto& p : rec) {
      positions.push_back({p.side == Side::kLeft ? "L" : "R", p.index});
    }
    plan.push_back(std::move(positions));
  }
  return nlohmann::json{{"cluster_id", set.cluster_id},
                        {"strategy", strategy_name(set.strategy)},
                        {"seed", set.seed},
                        {"mask_plan", std::move(plan)},
                        {"candidates", std::move(ranked)}};
}

RerankedSet reranked_from_json(const nlohmann::json& j) {
  RerankedSet set;
  set.cluster_id = j.at("cluster_id").get<int>();
  set.strategy = strategy_from_name(j.at("strategy").get<std::string>());
  set.seed = j.at("seed").get<std::uint64_t>();
  set.plan.strategy = set.strategy;
  set.plan.seed = set.seed;
  for (const auto& rec : j.at("mask_plan")) {
    std::vector<ContextPosition> positions;
    for (const auto& p : rec) {
      positions.push_back(ContextPosition{p.at(0).get<std::string>() == "L" ? Side::kLeft
                                                                            : Side::kRight,
                                          p.at(1).get<std::size_t>()});
    }
    set.plan.per_record.push_back(std::move(positions));
  }
  for (const auto& c : j.at("candidates")) {
    set.ranked.push_back(RankedCandidate{candidate_from_json(c), c.at("rerank_score").get<double>()});
  }
  return set;
}

}  // namespace mwepara
