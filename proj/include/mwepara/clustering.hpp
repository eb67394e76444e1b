#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "mwepara/corpus.hpp"
#include "mwepara/mlm_backend.hpp"

namespace mwepara {

inline constexpr int kOutlierLabel = -1;

// Row-major single-precision matrix; row i belongs to record i.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  void append(const MaskEmbedding& row);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const float> row(std::size_t i) const {
    return std::span<const float>(data_).subspan(i * cols_, cols_);
  }
  const std::vector<float>& data() const { return data_; }

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

struct DbscanParams {
  double eps = 0.4;
  std::size_t min_pts = 3;

  // max(3, round(0.03 * n)), rounding half away from zero.
  static std::size_t default_min_pts(std::size_t n);
  void validate() const;
};

struct ClusterModel {
  std::vector<int> labels;
  std::map<int, std::vector<double>> centroids;
  DbscanParams params;
  bool all_outlier_fallback = false;

  std::size_t cluster_count() const { return centroids.size(); }
  std::vector<std::size_t> members(int cluster_id) const;
};

// Row i is the mask state of record i with its MWE replaced by one mask.
EmbeddingMatrix embed_occurrences(std::span<const SpanContext> contexts,
                                  std::span<const OccurrenceRecord> records,
                                  const MlmBackend& backend);

// Plain DBSCAN over cosine distance (1 - cos). Points are visited in row
// order and each cluster is expanded completely before the next starts, so a
// border point reachable from several clusters joins the one that reaches
// it first. Labels are renumbered 0..C-1 by first member; -1 is noise.
// Throws DegenerateInput on a zero-norm row.
std::vector<int> dbscan_labels(const EmbeddingMatrix& matrix, const DbscanParams& params);

// Mean of member rows per non-outlier cluster. With `normalize_rows` the
// rows are scaled to unit length first.
std::map<int, std::vector<double>> compute_centroids(const EmbeddingMatrix& matrix,
                                                     std::span<const int> labels,
                                                     bool normalize_rows = false);

// dbscan_labels + centroids. If every point is noise, all points become
// cluster 0 and all_outlier_fallback is set.
ClusterModel dbscan_cosine(const EmbeddingMatrix& matrix, const DbscanParams& params,
                           bool normalize_rows = false);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Cluster whose centroid is most cosine-similar to `target`; ties go to the
// lower id. Throws NoClusters on an empty model.
int select_cluster(std::span<const float> target, const ClusterModel& model);

}  // namespace mwepara
