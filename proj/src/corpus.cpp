#include "mwepara/corpus.hpp"

#include <algorithm>
#include <istream>

#include "mwepara/error.hpp"
#include "mwepara/text.hpp"

namespace mwepara {

void CorpusConfig::validate() const {
  if (max_keep < 1) throw Error(ErrorCode::kInvalidInput, "max_keep must be >= 1");
  if (window_size < 1) throw Error(ErrorCode::kInvalidInput, "window_size must be >= 1");
}

void validate_mwe_surface(std::string_view mwe) {
  const auto first = mwe.find_first_not_of(' ');
  const auto last = mwe.find_last_not_of(' ');
  if (first == std::string_view::npos || first != 0 || last != mwe.size() - 1 ||
      mwe.find(' ') == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidInput,
                "MWE surface must be non-empty and contain an internal space: '" +
                    std::string(mwe) + "'");
  }
}

std::optional<Span> find_mwe(std::string_view line, std::string_view mwe) {
  if (mwe.empty()) return std::nullopt;
  for (auto pos = line.find(mwe); pos != std::string_view::npos; pos = line.find(mwe, pos + 1)) {
    const std::size_t end = pos + mwe.size();
    if (!text::letter_before(line, pos) && !text::letter_at(line, end)) {
      return Span{pos, end};
    }
  }
  return std::nullopt;
}

OccurrenceRecord make_record(std::uint64_t id, std::string text, std::string_view mwe,
                             Span span, std::size_t window_size) {
  OccurrenceRecord record;
  record.id = id;
  record.mwe_surface = std::string(mwe);
  record.span = span;

  auto left = text::window_tokens(std::string_view(text).substr(0, span.begin));
  auto right = text::window_tokens(std::string_view(text).substr(span.end));
  if (left.size() > window_size) left.erase(left.begin(), left.end() - window_size);
  if (right.size() > window_size) right.resize(window_size);
  record.left_window = std::move(left);
  record.right_window = std::move(right);
  record.text = std::move(text);
  return record;
}

std::size_t window_overlap(const OccurrenceRecord& a, const OccurrenceRecord& b) {
  auto combined = [](const OccurrenceRecord& r) {
    std::vector<std::string> tokens = r.left_window;
    tokens.insert(tokens.end(), r.right_window.begin(), r.right_window.end());
    std::sort(tokens.begin(), tokens.end());
    return tokens;
  };
  const auto ta = combined(a);
  const auto tb = combined(b);
  std::vector<std::string> shared;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(shared));
  return shared.size();
}

bool Sparsifier::offer(OccurrenceRecord record) {
  for (const auto& kept : kept_) {
    if (window_overlap(kept, record) >= threshold_) return false;
  }
  kept_.push_back(std::move(record));
  return true;
}

std::vector<OccurrenceRecord> sparsify(std::span<const OccurrenceRecord> records,
                                       const CorpusConfig& config) {
  Sparsifier sparsifier(config.dedup_overlap_threshold);
  for (const auto& r : records) sparsifier.offer(r);
  return sparsifier.release();
}

std::vector<OccurrenceRecord> collect_sentences(std::istream& corpus, std::string_view mwe,
                                                const CorpusConfig& config) {
  validate_mwe_surface(mwe);
  config.validate();

  Sparsifier sparsifier(config.dedup_overlap_threshold);
  std::size_t matched = 0;
  std::string line;
  for (std::uint64_t line_no = 0; std::getline(corpus, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto span = find_mwe(line, mwe);
    if (!span) continue;
    ++matched;
    sparsifier.offer(make_record(line_no, std::move(line), mwe, *span, config.window_size));
    if (sparsifier.kept().size() >= config.max_keep) break;
  }
  if (matched == 0) {
    throw Error(ErrorCode::kEmptyResult, "no sentence contains '" + std::string(mwe) + "'");
  }
  return sparsifier.release();
}

nlohmann::json record_to_json(const OccurrenceRecord& record) {
  return nlohmann::json{
      {"id", record.id},
      {"text", record.text},
      {"span", {record.span.begin, record.span.end}},
      {"windows", {{"left", record.left_window}, {"right", record.right_window}}},
  };
}

OccurrenceRecord record_from_json(const nlohmann::json& j, std::string_view mwe) {
  OccurrenceRecord record;
  record.id = j.at("id").get<std::uint64_t>();
  record.text = j.at("text").get<std::string>();
  record.mwe_surface = std::string(mwe);
  record.span = Span{j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()};
  record.left_window = j.at("windows").at("left").get<std::vector<std::string>>();
  record.right_window = j.at("windows").at("right").get<std::vector<std::string>>();
  if (record.span.end > record.text.size() || record.span.begin > record.span.end ||
      std::string_view(record.text).substr(record.span.begin, record.span.size()) != mwe) {
    throw Error(ErrorCode::kSpanMismatch,
                "record " + std::to_string(record.id) + " span does not cover '" +
                    std::string(mwe) + "'");
  }
  return record;
}

}  // namespace mwepara
