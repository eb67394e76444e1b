#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mwepara/span.hpp"

namespace mwepara {

struct OccurrenceRecord {
  std::uint64_t id = 0;  // zero-based corpus line number
  std::string text;
  std::string mwe_surface;
  Span span;
  std::vector<std::string> left_window;
  std::vector<std::string> right_window;

  bool operator==(const OccurrenceRecord&) const = default;
};

struct CorpusConfig {
  std::size_t max_keep = 300;
  std::size_t window_size = 3;
  std::size_t dedup_overlap_threshold = 4;

  void validate() const;
};

// Throws InvalidInput unless `mwe` is non-empty with an internal space.
void validate_mwe_surface(std::string_view mwe);

// First occurrence of `mwe` in `line` bounded by non-letters or line ends.
std::optional<Span> find_mwe(std::string_view line, std::string_view mwe);

OccurrenceRecord make_record(std::uint64_t id, std::string text, std::string_view mwe,
                             Span span, std::size_t window_size);

// Size of the multiset intersection of the two records' combined windows.
std::size_t window_overlap(const OccurrenceRecord& a, const OccurrenceRecord& b);

// Greedy first-wins near-duplicate filter, usable one record at a time.
class Sparsifier {
 public:
  explicit Sparsifier(std::size_t overlap_threshold) : threshold_(overlap_threshold) {}

  // Keeps `record` iff it overlaps every previously kept record by fewer
  // than the threshold. Returns whether it was kept.
  bool offer(OccurrenceRecord record);

  const std::vector<OccurrenceRecord>& kept() const { return kept_; }
  std::vector<OccurrenceRecord> release() { return std::move(kept_); }

 private:
  std::size_t threshold_;
  std::vector<OccurrenceRecord> kept_;
};

std::vector<OccurrenceRecord> sparsify(std::span<const OccurrenceRecord> records,
                                       const CorpusConfig& config);

// Streams `corpus` line by line and returns up to config.max_keep sparsified
// records in corpus order. Throws EmptyResult when nothing matches.
std::vector<OccurrenceRecord> collect_sentences(std::istream& corpus, std::string_view mwe,
                                                const CorpusConfig& config);

nlohmann::json record_to_json(const OccurrenceRecord& record);
OccurrenceRecord record_from_json(const nlohmann::json& j, std::string_view mwe);

}  // namespace mwepara
