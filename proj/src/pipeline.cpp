#include "mwepara/pipeline.hpp"

#include <algorithm>
#include <istream>
#include <set>

#include "mwepara/error.hpp"
#include "mwepara/text.hpp"

namespace mwepara {

std::vector<SpanContext> tokenize_records(std::span<const OccurrenceRecord> records,
                                          const MlmBackend& backend) {
  std::vector<SpanContext> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    try {
      out.push_back(tokenize_context(backend, r.text, r.span));
    } catch (const Error& e) {
      throw Error(e.code(), "record " + std::to_string(r.id) + ": " + e.message());
    }
  }
  return out;
}

ParaphraseArtifact build_artifact(std::string_view mwe_surface, std::istream& corpus,
                                  const MlmBackend& backend, const PipelineConfig& config) {
  auto records = collect_sentences(corpus, mwe_surface, config.corpus);
  return build_artifact_from_records(mwe_surface, std::move(records), backend, config);
}

ParaphraseArtifact build_artifact_from_records(std::string_view mwe_surface,
                                               std::vector<OccurrenceRecord> records,
                                               const MlmBackend& backend,
                                               const PipelineConfig& config) {
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyResult, "no sentences for '" + std::string(mwe_surface) + "'");
  }
  ParaphraseArtifact a;
  a.mwe_surface = std::string(mwe_surface);
  a.checkpoint = backend.info().checkpoint;
  a.records = std::move(records);

  const auto contexts = tokenize_records(a.records, backend);
  a.embeddings = embed_occurrences(contexts, a.records, backend);
  const auto params = resolve_dbscan(config, a.checkpoint, a.records.size());
  a.clusters = dbscan_cosine(a.embeddings, params, config.normalize_embeddings);

  for (const auto& [cluster_id, centroid] : a.clusters.centroids) {
    std::vector<SpanContext> members;
    for (std::size_t i : a.clusters.members(cluster_id)) members.push_back(contexts[i]);

    auto set = generate_candidates(members, backend, a.mwe_surface, cluster_id, config.generation);
    RerankedSet ranked;
    if (set.candidates.empty()) {
      ranked.cluster_id = cluster_id;
      ranked.strategy = config.rerank.strategy;
      ranked.seed = config.rerank.seed;
      ranked.plan.strategy = config.rerank.strategy;
      ranked.plan.seed = config.rerank.seed;
    } else {
      ranked = rerank(set, members, backend, config.rerank);
    }
    a.candidates.push_back(std::move(set));
    a.reranked.push_back(std::move(ranked));
  }

  auto snapshot = config_to_json(config);
  snapshot["eps"] = params.eps;
  snapshot["min_pts"] = params.min_pts;
  a.config = std::move(snapshot);
  a.content_hash = compute_content_hash(a, serialize_payload(a));
  return a;
}

ParaphraseResult paraphrase(std::string_view sentence, Span span,
                            const ParaphraseArtifact& artifact, const MlmBackend& backend,
                            std::size_t top_n) {
  if (span.begin > span.end || span.end > sentence.size() ||
      sentence.substr(span.begin, span.size()) != artifact.mwe_surface) {
    throw Error(ErrorCode::kSpanMismatch,
                "span does not cover '" + artifact.mwe_surface + "' in the target sentence");
  }
  if (artifact.checkpoint != backend.info().checkpoint) {
    throw Error(ErrorCode::kInvalidInput, "artifact was built with '" + artifact.checkpoint +
                                              "' but the backend serves '" +
                                              backend.info().checkpoint + "'");
  }
  const auto ctx = tokenize_context(backend, sentence, span);
  const auto states = backend.mask_hidden_states(ctx.with(make_masks(backend.info(), 1)));
  if (states.size() != 1) throw Error(ErrorCode::kBackendError, "expected one mask state");

  ParaphraseResult result;
  result.cluster_id = select_cluster(states.front().values, artifact.clusters);
  if (const auto* ranked = artifact.reranked_for(result.cluster_id)) {
    for (const auto& r : ranked->ranked) {
      if (result.surfaces.size() == top_n) break;
      result.surfaces.push_back(r.candidate.surface);
    }
  }
  return result;
}

std::vector<GoldItem> read_gold(std::istream& in) {
  std::vector<GoldItem> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (text::split_whitespace(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      GoldItem item;
      item.sentence = j.at("sentence").get<std::string>();
      item.span = Span{j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()};
      item.gold = j.at("gold").get<std::string>();
      if (item.span.begin >= item.span.end || item.span.end > item.sentence.size()) {
        throw Error(ErrorCode::kInvalidInput, "span out of range");
      }
      if (text::normalize_whitespace(item.gold).empty()) {
        throw Error(ErrorCode::kInvalidInput, "empty gold paraphrase");
      }
      out.push_back(std::move(item));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidInput, "gold line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), "gold line " + std::to_string(line_no) + ": " + e.message());
    }
  }
  return out;
}

std::string normalize_for_match(std::string_view s) {
  return text::normalize_whitespace(text::to_lower(s));
}

std::map<std::size_t, double> precision_at_k(std::span<const std::vector<std::string>> predictions,
                                             std::span<const std::string> golds,
                                             std::span<const std::size_t> ks) {
  if (golds.empty()) throw Error(ErrorCode::kInvalidInput, "empty gold list");
  if (predictions.size() != golds.size()) {
    throw Error(ErrorCode::kInvalidInput, "predictions and golds differ in length");
  }
  std::map<std::size_t, std::size_t> hits;
  for (std::size_t k : ks) hits[k] = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto gold = normalize_for_match(golds[i]);
    const auto& ranked = predictions[i];
    std::size_t rank = ranked.size();  // 0-based rank of the first match
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      if (normalize_for_match(ranked[r]) == gold) {
        rank = r;
        break;
      }
    }
    for (auto& [k, h] : hits) {
      if (rank < k) ++h;
    }
  }
  std::map<std::size_t, double> out;
  for (const auto& [k, h] : hits) {
    out[k] = static_cast<double>(h) / static_cast<double>(golds.size());
  }
  return out;
}

std::map<std::size_t, double> eval_patk(std::span<const GoldItem> gold,
                                        const std::map<std::string, ParaphraseArtifact>& artifacts,
                                        const MlmBackend& backend,
                                        std::span<const std::size_t> ks) {
  if (gold.empty()) throw Error(ErrorCode::kInvalidInput, "empty gold list");
  if (ks.empty()) throw Error(ErrorCode::kInvalidInput, "no k values");
  std::set<std::string> missing;
  for (const auto& item : gold) {
    if (!artifacts.contains(item.mwe())) missing.insert(item.mwe());
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "'" : ", '") + m + "'";
    throw Error(ErrorCode::kMissingArtifact, "no artifact for " + list);
  }
  const std::size_t top_n = *std::max_element(ks.begin(), ks.end());
  std::vector<std::vector<std::string>> predictions;
  std::vector<std::string> golds;
  for (const auto& item : gold) {
    predictions.push_back(
        paraphrase(item.sentence, item.span, artifacts.at(item.mwe()), backend, top_n).surfaces);
    golds.push_back(item.gold);
  }
  return precision_at_k(predictions, golds, ks);
}

std::vector<double> ave3_embedding(std::string_view sentence, Span span,
                                   std::span<const std::string> surfaces,
                                   const SentenceEncoder& encoder) {
  if (surfaces.empty() || surfaces.size() > 3) {
    throw Error(ErrorCode::kInvalidInput, "expected between one and three paraphrases");
  }
  if (span.begin > span.end || span.end > sentence.size()) {
    throw Error(ErrorCode::kInvalidInput, "span out of range");
  }
  std::vector<double> sum;
  for (const auto& surface : surfaces) {
    std::string substituted(sentence.substr(0, span.begin));
    substituted += surface;
    substituted += sentence.substr(span.end);
    const auto v = encoder.encode(substituted);
    if (sum.empty()) sum.assign(v.size(), 0.0);
    if (v.size() != sum.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "encoder returned vectors of different sizes");
    }
    for (std::size_t i = 0; i < v.size(); ++i) sum[i] += v[i];
  }
  for (auto& x : sum) x /= static_cast<double>(surfaces.size());
  return sum;
}

}  // namespace mwepara
