#include "mwepara/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "mwepara/error.hpp"

namespace mwepara {

EmbeddingMatrix::EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorCode::kDimensionMismatch, "matrix data does not match its shape");
  }
}

void EmbeddingMatrix::append(const MaskEmbedding& row) {
  if (rows_ == 0 && cols_ == 0) cols_ = row.size();
  if (row.size() != cols_ || cols_ == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "embedding row has " + std::to_string(row.size()) +
                                                   " components, expected " +
                                                   std::to_string(cols_));
  }
  for (float v : row.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kDegenerateInput, "non-finite embedding value");
  }
  data_.insert(data_.end(), row.values.begin(), row.values.end());
  ++rows_;
}

std::size_t DbscanParams::default_min_pts(std::size_t n) {
  // round(0.03 n) = round(3n / 100), half away from zero, in exact integers.
  const std::size_t rounded = (3 * n + 50) / 100;
  return std::max<std::size_t>(3, rounded);
}

void DbscanParams::validate() const {
  if (!(eps > 0.0) || eps > 2.0) {
    throw Error(ErrorCode::kInvalidInput, "eps must lie in (0, 2]");
  }
  if (min_pts < 1) throw Error(ErrorCode::kInvalidInput, "min_pts must be >= 1");
}

std::vector<std::size_t> ClusterModel::members(int cluster_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == cluster_id) out.push_back(i);
  }
  return out;
}

EmbeddingMatrix embed_occurrences(std::span<const SpanContext> contexts,
                                  std::span<const OccurrenceRecord> records,
                                  const MlmBackend& backend) {
  if (contexts.size() != records.size()) {
    throw Error(ErrorCode::kInvalidInput, "contexts and records differ in length");
  }
  const auto mask = make_masks(backend.info(), 1);
  EmbeddingMatrix matrix;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    try {
      const auto states = backend.mask_hidden_states(contexts[i].with(mask));
      if (states.size() != 1) {
        throw Error(ErrorCode::kBackendError, "expected one mask state");
      }
      matrix.append(states.front());
    } catch (const Error& e) {
      throw Error(e.code(), "record " + std::to_string(records[i].id) + ": " + e.message());
    }
  }
  return matrix;
}

namespace {

std::vector<std::vector<double>> unit_rows(const EmbeddingMatrix& m) {
  std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    double norm = 0.0;
    for (float v : row) norm += static_cast<double>(v) * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) {
      throw Error(ErrorCode::kDegenerateInput, "row " + std::to_string(i) + " has zero norm");
    }
    for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = row[j] / norm;
  }
  return out;
}

// Relabels clusters 0..C-1 in order of their first member.
void renumber_by_first_member(std::vector<int>& labels) {
  std::map<int, int> mapping;
  for (int& l : labels) {
    if (l == kOutlierLabel) continue;
    const auto [it, inserted] = mapping.emplace(l, static_cast<int>(mapping.size()));
    l = it->second;
  }
}

}  // namespace

std::vector<int> dbscan_labels(const EmbeddingMatrix& matrix, const DbscanParams& params) {
  params.validate();
  const std::size_t n = matrix.rows();
  if (n == 0) throw Error(ErrorCode::kInvalidInput, "cannot cluster an empty matrix");
  const auto unit = unit_rows(matrix);

  // Neighbourhoods include the point itself.
  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < matrix.cols(); ++c) dot += unit[i][c] * unit[j][c];
      if (1.0 - dot <= params.eps) neighbours[i].push_back(j);
    }
  }

  constexpr int kUnvisited = -2;
  std::vector<int> labels(n, kUnvisited);
  int next_cluster = 0;
  for (std::size_t p = 0; p < n; ++p) {
    if (labels[p] != kUnvisited) continue;
    if (neighbours[p].size() < params.min_pts) {
      labels[p] = kOutlierLabel;
      continue;
    }
    const int cluster = next_cluster++;
    labels[p] = cluster;
    std::deque<std::size_t> frontier(neighbours[p].begin(), neighbours[p].end());
    while (!frontier.empty()) {
      const std::size_t q = frontier.front();
      frontier.pop_front();
      if (labels[q] == kOutlierLabel) labels[q] = cluster;  // border point
      if (labels[q] != kUnvisited) continue;
      labels[q] = cluster;
      if (neighbours[q].size() >= params.min_pts) {
        frontier.insert(frontier.end(), neighbours[q].begin(), neighbours[q].end());
      }
    }
  }
  renumber_by_first_member(labels);
  return labels;
}

std::map<int, std::vector<double>> compute_centroids(const EmbeddingMatrix& matrix,
                                                     std::span<const int> labels,
                                                     bool normalize_rows) {
  if (labels.size() != matrix.rows()) {
    throw Error(ErrorCode::kInvalidInput, "labels and matrix rows differ in length");
  }
  std::map<int, std::vector<double>> sums;
  std::map<int, std::size_t> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kOutlierLabel) continue;
    auto& sum = sums[labels[i]];
    sum.resize(matrix.cols(), 0.0);
    const auto row = matrix.row(i);
    double scale = 1.0;
    if (normalize_rows) {
      double norm = 0.0;
      for (float v : row) norm += static_cast<double>(v) * v;
      scale = norm > 0.0 ? 1.0 / std::sqrt(norm) : 0.0;
    }
    for (std::size_t c = 0; c < matrix.cols(); ++c) sum[c] += row[c] * scale;
    ++counts[labels[i]];
  }
  for (auto& [id, sum] : sums) {
    for (auto& v : sum) v /= static_cast<double>(counts[id]);
  }
  return sums;
}

ClusterModel dbscan_cosine(const EmbeddingMatrix& matrix, const DbscanParams& params,
                           bool normalize_rows) {
  ClusterModel model;
  model.params = params;
  model.labels = dbscan_labels(matrix, params);
  if (std::all_of(model.labels.begin(), model.labels.end(),
                  [](int l) { return l == kOutlierLabel; })) {
    std::fill(model.labels.begin(), model.labels.end(), 0);
    model.all_outlier_fallback = true;
  }
  model.centroids = compute_centroids(matrix, model.labels, normalize_rows);
  return model;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine of vectors with different sizes");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw Error(ErrorCode::kDegenerateInput, "cosine with a zero vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

int select_cluster(std::span<const float> target, const ClusterModel& model) {
  if (model.centroids.empty()) throw Error(ErrorCode::kNoClusters, "cluster model is empty");
  const std::vector<double> t(target.begin(), target.end());
  int best = kOutlierLabel;
  double best_sim = 0.0;
  for (const auto& [id, centroid] : model.centroids) {
    const double sim = cosine_similarity(t, centroid);
    if (best == kOutlierLabel || sim > best_sim) {
      best = id;
      best_sim = sim;
    }
  }
  return best;
}

}  // namespace mwepara
