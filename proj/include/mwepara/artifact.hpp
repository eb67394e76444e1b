#pragma once

// Per-MWE artifact store. One directory per MWE under a store root:
//
//   <slug>-<hash8>/
//     sentences.jsonl   one OccurrenceRecord per line
//     embeddings.bin    u32 N, u32 d (little-endian), then N*d float32 LE, row-major
//     clusters.json     labels, centroids, DBSCAN params, checkpoint, N, d
//     candidates.json   generated candidates per cluster
//     reranked.json     reranked candidates per cluster
//     manifest.json     MWE, checkpoint, config snapshot, content hash
//
// The content hash is SHA-256 over the MWE, checkpoint, config snapshot and
// the exact bytes of the five payload files. Directories are written to a
// temporary sibling and renamed into place.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mwepara/clustering.hpp"
#include "mwepara/corpus.hpp"
#include "mwepara/generation.hpp"
#include "mwepara/reranking.hpp"

namespace mwepara {

struct ParaphraseArtifact {
  std::string mwe_surface;
  std::string checkpoint;
  std::vector<OccurrenceRecord> records;
  EmbeddingMatrix embeddings;
  ClusterModel clusters;
  std::vector<CandidateSet> candidates;  // one per non-outlier cluster, by id
  std::vector<RerankedSet> reranked;     // one per non-outlier cluster, by id
  nlohmann::json config;
  std::string content_hash;

  const RerankedSet* reranked_for(int cluster_id) const;
};

using ArtifactPayload = std::vector<std::pair<std::string, std::string>>;

std::string encode_embeddings(const EmbeddingMatrix& matrix);
EmbeddingMatrix decode_embeddings(std::string_view bytes);

// The five payload files in canonical order, as exact bytes.
ArtifactPayload serialize_payload(const ParaphraseArtifact& artifact);
std::string compute_content_hash(const ParaphraseArtifact& artifact,
                                 const ArtifactPayload& payload);

std::string artifact_dir_name(std::string_view mwe);

std::filesystem::path write_artifact(const ParaphraseArtifact& artifact,
                                     const std::filesystem::path& store_root);

// Loads and verifies an artifact directory. Throws IoError on a hash
// mismatch or malformed file.
ParaphraseArtifact read_artifact(const std::filesystem::path& dir);

std::filesystem::path artifact_path(const std::filesystem::path& store_root,
                                    std::string_view mwe);

}  // namespace mwepara
