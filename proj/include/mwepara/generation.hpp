#pragma once

// Paraphrase candidate generation for one cluster of occurrences.
//
// One-token candidates come from the output head applied to the mean of the
// single-mask states over all cluster members. Two-token candidates fill two
// masks in both orders: the top `beam` first tokens are fixed in turn and
// the second mask is predicted given each, and symmetrically with the second
// token fixed first; a phrase scores sqrt(P(first) * P(second | first)).

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mwepara/mlm_backend.hpp"

namespace mwepara {

enum class CandidateOrigin { kOneMask, kTwoMaskForward, kTwoMaskBackward };

std::string_view origin_name(CandidateOrigin origin);
CandidateOrigin origin_from_name(std::string_view name);

struct Candidate {
  std::vector<TokenId> token_ids;
  std::string surface;
  double gen_score = 0.0;
  CandidateOrigin origin = CandidateOrigin::kOneMask;

  bool operator==(const Candidate&) const = default;
};

struct CandidateSet {
  std::string mwe_surface;
  int cluster_id = 0;
  std::vector<Candidate> candidates;
};

struct GenerationConfig {
  std::size_t one_token_k = 10;
  std::size_t two_token_k = 10;
  std::size_t beam = 5;
  std::size_t head_k = 50;  // entries requested from the output head
  double edit_threshold = 0.2;
};

// sqrt(first * second_given_first).
double joint_score(double first, double second_given_first);

// Mean, in member order, of the state at mask `ordinal` after substituting
// `replacement` for the span of every context.
std::vector<double> average_mask_state(std::span<const SpanContext> contexts,
                                       const MlmBackend& backend, const TokenSeq& replacement,
                                       std::size_t ordinal);

std::vector<Candidate> generate_one_token(std::span<const SpanContext> contexts,
                                          const MlmBackend& backend,
                                          const GenerationConfig& config = {});

std::vector<Candidate> generate_two_token(std::span<const SpanContext> contexts,
                                          const MlmBackend& backend,
                                          const GenerationConfig& config = {});

// Drops candidates whose normalised edit distance to the MWE is <= threshold.
std::vector<Candidate> filter_near_copies(std::vector<Candidate> candidates,
                                          std::string_view mwe_surface, double threshold = 0.2);

// Union keeping first-seen order; a repeated surface keeps the higher score.
CandidateSet merge_candidates(std::span<const Candidate> one_token,
                              std::span<const Candidate> two_token,
                              std::string_view mwe_surface, int cluster_id);

// Filtered one- and two-token generation merged into one set.
CandidateSet generate_candidates(std::span<const SpanContext> contexts, const MlmBackend& backend,
                                 std::string_view mwe_surface, int cluster_id,
                                 const GenerationConfig& config = {});

nlohmann::json candidate_to_json(const Candidate& c);
Candidate candidate_from_json(const nlohmann::json& j);

}  // namespace mwepara
