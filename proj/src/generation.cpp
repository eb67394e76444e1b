#include "mwepara/generation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mwepara/error.hpp"
#include "mwepara/text.hpp"

namespace mwepara {

std::string_view origin_name(CandidateOrigin origin) {
  switch (origin) {
    case CandidateOrigin::kOneMask: return "one_mask";
    case CandidateOrigin::kTwoMaskForward: return "two_mask_forward";
    case CandidateOrigin::kTwoMaskBackward: return "two_mask_backward";
  }
  return "one_mask";
}

CandidateOrigin origin_from_name(std::string_view name) {
  for (auto o : {CandidateOrigin::kOneMask, CandidateOrigin::kTwoMaskForward,
                 CandidateOrigin::kTwoMaskBackward}) {
    if (origin_name(o) == name) return o;
  }
  throw Error(ErrorCode::kInvalidInput, "unknown candidate origin '" + std::string(name) + "'");
}

double joint_score(double first, double second_given_first) {
  return std::sqrt(first * second_given_first);
}

namespace {

// A word-initial token: the only kind that may start a paraphrase.
bool eligible_head(const TopKEntry& e) {
  return !e.is_special && !e.is_subword && !e.surface.empty() &&
         !text::is_punctuation_token(e.surface);
}

// Second tokens may continue the first word.
bool eligible_tail(const TopKEntry& e) {
  return !e.is_special && !e.surface.empty() && !text::is_punctuation_token(e.surface);
}

template <typename Pred>
std::vector<TopKEntry> top_eligible(const TopKDistribution& dist, std::size_t k, Pred pred) {
  std::vector<TopKEntry> out;
  for (const auto& e : dist.entries) {
    if (out.size() == k) break;
    if (pred(e)) out.push_back(e);
  }
  return out;
}

std::vector<std::vector<double>> average_mask_states(std::span<const SpanContext> contexts,
                                                     const MlmBackend& backend,
                                                     const TokenSeq& replacement) {
  if (contexts.empty()) throw Error(ErrorCode::kInvalidInput, "cluster has no members");
  std::vector<std::vector<double>> sums;
  for (const auto& ctx : contexts) {
    const auto states = backend.mask_hidden_states(ctx.with(replacement));
    if (sums.empty()) {
      sums.assign(states.size(), std::vector<double>(backend.info().hidden_size, 0.0));
    }
    if (states.size() != sums.size()) {
      throw Error(ErrorCode::kBackendError, "inconsistent number of mask states");
    }
    for (std::size_t m = 0; m < states.size(); ++m) {
      if (states[m].size() != sums[m].size()) {
        throw Error(ErrorCode::kDimensionMismatch, "mask state has the wrong hidden size");
      }
      for (std::size_t j = 0; j < sums[m].size(); ++j) sums[m][j] += states[m].values[j];
    }
  }
  const auto n = static_cast<double>(contexts.size());
  for (auto& s : sums) {
    for (auto& v : s) v /= n;
  }
  return sums;
}

TokenSeq single(const TopKEntry& e) {
  TokenSeq seq;
  seq.push_back(e.id, e.surface, e.is_subword);
  return seq;
}

Candidate make_pair_candidate(const TopKEntry& first, const TopKEntry& second, double score,
                              CandidateOrigin origin) {
  Candidate c;
  c.token_ids = {first.id, second.id};
  c.surface = first.surface + (second.is_subword ? "" : " ") + second.surface;
  c.gen_score = score;
  c.origin = origin;
  return c;
}

}  // namespace

std::vector<double> average_mask_state(std::span<const SpanContext> contexts,
                                       const MlmBackend& backend, const TokenSeq& replacement,
                                       std::size_t ordinal) {
  auto states = average_mask_states(contexts, backend, replacement);
  if (ordinal >= states.size()) throw Error(ErrorCode::kInvalidInput, "mask ordinal out of range");
  return std::move(states[ordinal]);
}

std::vector<Candidate> generate_one_token(std::span<const SpanContext> contexts,
                                          const MlmBackend& backend,
                                          const GenerationConfig& config) {
  const auto mean = average_mask_state(contexts, backend, make_masks(backend.info(), 1), 0);
  const auto dist = backend.apply_output_head(mean, std::max(config.head_k, config.one_token_k));
  std::vector<Candidate> out;
  for (const auto& e : top_eligible(dist, config.one_token_k, eligible_head)) {
    out.push_back(Candidate{{e.id}, e.surface, e.probability, CandidateOrigin::kOneMask});
  }
  return out;
}

std::vector<Candidate> generate_two_token(std::span<const SpanContext> contexts,
                                          const MlmBackend& backend,
                                          const GenerationConfig& config) {
  const auto& info = backend.info();
  const std::size_t head_k = std::max(config.head_k, config.beam);
  const auto both = average_mask_states(contexts, backend, make_masks(info, 2));
  if (both.size() != 2) throw Error(ErrorCode::kBackendError, "expected two mask states");

  std::vector<Candidate> phrases;

  // Forward: fix the first token, predict the second.
  const auto firsts =
      top_eligible(backend.apply_output_head(both[0], head_k), config.beam, eligible_head);
  for (const auto& first : firsts) {
    TokenSeq rep = single(first);
    rep.append(make_masks(info, 1));
    const auto given = average_mask_state(contexts, backend, rep, 0);
    const auto seconds =
        top_eligible(backend.apply_output_head(given, head_k), config.beam, eligible_tail);
    for (const auto& second : seconds) {
      phrases.push_back(make_pair_candidate(first, second,
                                            joint_score(first.probability, second.probability),
                                            CandidateOrigin::kTwoMaskForward));
    }
  }

  // Backward: fix the second token, predict the first.
  const auto seconds =
      top_eligible(backend.apply_output_head(both[1], head_k), config.beam, eligible_tail);
  for (const auto& second : seconds) {
    TokenSeq rep = make_masks(info, 1);
    rep.append(single(second));
    const auto given = average_mask_state(contexts, backend, rep, 0);
    const auto firsts_given =
        top_eligible(backend.apply_output_head(given, head_k), config.beam, eligible_head);
    for (const auto& first : firsts_given) {
      phrases.push_back(make_pair_candidate(first, second,
                                            joint_score(second.probability, first.probability),
                                            CandidateOrigin::kTwoMaskBackward));
    }
  }

  // Deduplicate by surface, keeping the best score (forward wins exact ties).
  std::vector<Candidate> unique;
  std::map<std::string, std::size_t> index;
  for (auto& p : phrases) {
    const auto [it, inserted] = index.emplace(p.surface, unique.size());
    if (inserted) {
      unique.push_back(std::move(p));
    } else if (p.gen_score > unique[it->second].gen_score) {
      unique[it->second] = std::move(p);
    }
  }
  std::stable_sort(unique.begin(), unique.end(), [](const Candidate& a, const Candidate& b) {
    if (a.gen_score != b.gen_score) return a.gen_score > b.gen_score;
    if (a.token_ids != b.token_ids) return a.token_ids < b.token_ids;
    return a.surface < b.surface;
  });
  if (unique.size() > config.two_token_k) unique.resize(config.two_token_k);
  return unique;
}

std::vector<Candidate> filter_near_copies(std::vector<Candidate> candidates,
                                          std::string_view mwe_surface, double threshold) {
  std::erase_if(candidates, [&](const Candidate& c) {
    return text::normalized_edit_distance(c.surface, mwe_surface) <= threshold;
  });
  return candidates;
}

CandidateSet merge_candidates(std::span<const Candidate> one_token,
                              std::span<const Candidate> two_token,
                              std::string_view mwe_surface, int cluster_id) {
  CandidateSet set;
  set.mwe_surface = std::string(mwe_surface);
  set.cluster_id = cluster_id;
  std::map<std::string, std::size_t> index;
  auto add = [&](const Candidate& c) {
    const auto [it, inserted] = index.emplace(c.surface, set.candidates.size());
    if (inserted) {
      set.candidates.push_back(c);
    } else if (c.gen_score > set.candidates[it->second].gen_score) {
      set.candidates[it->second] = c;
    }
  };
  for (const auto& c : one_token) add(c);
  for (const auto& c : two_token) add(c);
  return set;
}

CandidateSet generate_candidates(std::span<const SpanContext> contexts, const MlmBackend& backend,
                                 std::string_view mwe_surface, int cluster_id,
                                 const GenerationConfig& config) {
  const auto one = filter_near_copies(generate_one_token(contexts, backend, config), mwe_surface,
                                      config.edit_threshold);
  const auto two = filter_near_copies(generate_two_token(contexts, backend, config), mwe_surface,
                                      config.edit_threshold);
  return merge_candidates(one, two, mwe_surface, cluster_id);
}

nlohmann::json candidate_to_json(const Candidate& c) {
  return nlohmann::json{{"surface", c.surface},
                        {"token_ids", c.token_ids},
                        {"gen_score", c.gen_score},
                        {"origin", origin_name(c.origin)}};
}

Candidate candidate_from_json(const nlohmann::json& j) {
  Candidate c;
  c.surface = j.at("surface").get<std::string>();
  c.token_ids = j.at("token_ids").get<std::vector<TokenId>>();
  c.gen_score = j.at("gen_score").get<double>();
  c.origin = origin_from_name(j.at("origin").get<std::string>());
  return c;
}

}  // namespace mwepara
