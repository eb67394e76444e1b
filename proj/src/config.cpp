#include "mwepara/config.hpp"

#include <array>
#include <charconv>
#include <istream>

#include "mwepara/error.hpp"
#include "mwepara/text.hpp"

namespace mwepara {

namespace {

struct EpsPreset {
  std::string_view checkpoint;
  double eps;
};

constexpr std::array<EpsPreset, 9> kEpsPresets{{
    {"bert-base-uncased", 0.4},
    {"bert-large-uncased-whole-word-masking", 0.5},
    {"spanbert-large-cased", 0.3},
    {"albert-large-v2", 0.3},
    {"google/t5-v1_1-base", 0.4},
    {"google/t5-v1_1-large", 0.4},
    {"neuralmind/bert-base-portuguese-cased", 0.3},
    {"neuralmind/bert-large-portuguese-cased", 0.3},
    {"dvilares/bertinho-gl-base-cased", 0.3},
}};

std::size_t to_count(std::string_view key, std::string_view value) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::kInvalidInput,
                std::string(key) + ": expected a non-negative integer, got '" + std::string(value) + "'");
  }
  return out;
}

double to_real(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorCode::kInvalidInput,
                std::string(key) + ": expected a number, got '" + std::string(value) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCode::kInvalidInput,
              std::string(key) + ": expected true/false, got '" + std::string(value) + "'");
}

}  // namespace

std::optional<double> eps_preset(std::string_view checkpoint) {
  for (const auto& p : kEpsPresets) {
    if (p.checkpoint == checkpoint) return p.eps;
  }
  return std::nullopt;
}

DbscanParams resolve_dbscan(const PipelineConfig& config, std::string_view checkpoint,
                            std::size_t n_records) {
  DbscanParams params;
  params.eps = config.eps.value_or(eps_preset(checkpoint).value_or(kDefaultEps));
  params.min_pts = config.min_pts.value_or(DbscanParams::default_min_pts(n_records));
  params.validate();
  return params;
}

void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value) {
  if (key == "max_keep") {
    config.corpus.max_keep = to_count(key, value);
  } else if (key == "window_size") {
    config.corpus.window_size = to_count(key, value);
  } else if (key == "dedup_overlap_threshold") {
    config.corpus.dedup_overlap_threshold = to_count(key, value);
  } else if (key == "eps") {
    config.eps = to_real(key, value);
  } else if (key == "min_pts") {
    if (value == "auto") {
      config.min_pts.reset();
    } else {
      config.min_pts = to_count(key, value);
    }
  } else if (key == "normalize_embeddings") {
    config.normalize_embeddings = to_bool(key, value);
  } else if (key == "one_token_k") {
    config.generation.one_token_k = to_count(key, value);
  } else if (key == "two_token_k") {
    config.generation.two_token_k = to_count(key, value);
  } else if (key == "beam") {
    config.generation.beam = to_count(key, value);
  } else if (key == "head_k") {
    config.generation.head_k = to_count(key, value);
  } else if (key == "edit_threshold") {
    config.generation.edit_threshold = to_real(key, value);
  } else if (key == "strategy") {
    config.rerank.strategy = strategy_from_name(value);
  } else if (key == "mask_words") {
    config.rerank.mask_words = to_count(key, value);
  } else if (key == "seed") {
    config.rerank.seed = to_count(key, value);
  } else if (key == "attention_masks") {
    const auto n = to_count(key, value);
    if (n != 1 && n != 2) throw Error(ErrorCode::kInvalidInput, "attention_masks must be 1 or 2");
    config.rerank.attention_two_masks = n == 2;
  } else {
    throw Error(ErrorCode::kInvalidInput, "unknown setting '" + std::string(key) + "'");
  }
}

std::vector<std::pair<std::string, std::string>> read_key_values(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const auto trimmed = text::normalize_whitespace(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidInput,
                  "config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    out.emplace_back(text::normalize_whitespace(trimmed.substr(0, eq)),
                     text::normalize_whitespace(trimmed.substr(eq + 1)));
  }
  return out;
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j{
      {"max_keep", c.corpus.max_keep},
      {"window_size", c.corpus.window_size},
      {"dedup_overlap_threshold", c.corpus.dedup_overlap_threshold},
      {"normalize_embeddings", c.normalize_embeddings},
      {"one_token_k", c.generation.one_token_k},
      {"two_token_k", c.generation.two_token_k},
      {"beam", c.generation.beam},
      {"head_k", c.generation.head_k},
      {"edit_threshold", c.generation.edit_threshold},
      {"strategy", strategy_name(c.rerank.strategy)},
      {"mask_words", c.rerank.mask_words},
      {"seed", c.rerank.seed},
      {"attention_masks", c.rerank.attention_two_masks ? 2 : 1},
  };
  j["eps"] = c.eps ? nlohmann::json(*c.eps) : nlohmann::json(nullptr);
  j["min_pts"] = c.min_pts ? nlohmann::json(*c.min_pts) : nlohmann::json(nullptr);
  return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  for (const auto& [key, value] : j.items()) {
    if (value.is_null()) continue;
    apply_setting(c, key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  return c;
}

}  // namespace mwepara
