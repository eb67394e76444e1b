#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mwepara/artifact.hpp"
#include "mwepara/config.hpp"
#include "mwepara/mlm_backend.hpp"

namespace mwepara {

std::vector<SpanContext> tokenize_records(std::span<const OccurrenceRecord> records,
                                          const MlmBackend& backend);

// collect -> sparsify -> embed -> cluster -> generate -> rerank. Noise
// points take no part in generation. The returned artifact carries its
// content hash; persisting it is up to the caller (write_artifact).
ParaphraseArtifact build_artifact(std::string_view mwe_surface, std::istream& corpus,
                                  const MlmBackend& backend, const PipelineConfig& config);

ParaphraseArtifact build_artifact_from_records(std::string_view mwe_surface,
                                               std::vector<OccurrenceRecord> records,
                                               const MlmBackend& backend,
                                               const PipelineConfig& config);

struct ParaphraseResult {
  int cluster_id = 0;
  std::vector<std::string> surfaces;
};

// Embeds the target with one mask over the span, picks the nearest cluster
// centroid and returns that cluster's best `top_n` reranked surfaces.
ParaphraseResult paraphrase(std::string_view sentence, Span span,
                            const ParaphraseArtifact& artifact, const MlmBackend& backend,
                            std::size_t top_n);

struct GoldItem {
  std::string sentence;
  Span span;
  std::string gold;

  std::string mwe() const { return sentence.substr(span.begin, span.size()); }
};

// JSON lines: {"sentence": ..., "span": [begin, end], "gold": ...}.
std::vector<GoldItem> read_gold(std::istream& in);

// Lowercased, whitespace-collapsed form used for gold matching.
std::string normalize_for_match(std::string_view s);

// Fraction of items whose gold appears among the first k predictions.
std::map<std::size_t, double> precision_at_k(std::span<const std::vector<std::string>> predictions,
                                             std::span<const std::string> golds,
                                             std::span<const std::size_t> ks);

// Runs paraphrase() for every gold item against the artifact of its MWE.
// Throws MissingArtifact naming every MWE without an artifact.
std::map<std::size_t, double> eval_patk(std::span<const GoldItem> gold,
                                        const std::map<std::string, ParaphraseArtifact>& artifacts,
                                        const MlmBackend& backend,
                                        std::span<const std::size_t> ks);

class SentenceEncoder {
 public:
  virtual ~SentenceEncoder() = default;
  virtual std::vector<double> encode(std::string_view sentence) const = 0;
};

// Mean sentence embedding of the target with each of (up to three)
// paraphrases substituted for the span.
std::vector<double> ave3_embedding(std::string_view sentence, Span span,
                                   std::span<const std::string> surfaces,
                                   const SentenceEncoder& encoder);

}  // namespace mwepara
