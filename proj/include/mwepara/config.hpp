#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
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

inline constexpr double kDefaultEps = 0.4;

struct PipelineConfig {
  CorpusConfig corpus;
  std::optional<double> eps;             // unset: checkpoint preset, then kDefaultEps
  std::optional<std::size_t> min_pts;    // unset: max(3, round(0.03 N))
  bool normalize_embeddings = false;     // unit-normalise rows before centroids
  GenerationConfig generation;
  RerankConfig rerank;
};

// DBSCAN eps tuned per checkpoint; nullopt for unknown checkpoints.
std::optional<double> eps_preset(std::string_view checkpoint);

DbscanParams resolve_dbscan(const PipelineConfig& config, std::string_view checkpoint,
                            std::size_t n_records);

// Applies one "key = value" setting. Throws InvalidInput on unknown keys or
// unparsable values.
void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value);

// Reads "key = value" lines; '#' starts a comment line.
std::vector<std::pair<std::string, std::string>> read_key_values(std::istream& in);

nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& j);

}  // namespace mwepara
