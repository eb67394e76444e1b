#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "dbscan_oracle.hpp"
#include "mwepara/clustering.hpp"
#include "mwepara/error.hpp"
#include "test_support.hpp"

using namespace mwepara;

namespace {

EmbeddingMatrix matrix_of(const std::vector<std::vector<double>>& rows) {
  EmbeddingMatrix m;
  for (const auto& r : rows) m.append(MaskEmbedding{{r.begin(), r.end()}});
  return m;
}

// Rows as the library sees them, after single-precision storage.
std::vector<std::vector<double>> stored(const EmbeddingMatrix& m) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    out.emplace_back(r.begin(), r.end());
  }
  return out;
}

std::vector<std::vector<double>> blob(std::vector<double> centre, std::size_t n, double jitter,
                                      std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-jitter, jitter);
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n; ++i) {
    auto v = centre;
    for (auto& x : v) x += u(rng);
    out.push_back(v);
  }
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidInput;
}

class FailingBackend : public MlmBackend {
 public:
  explicit FailingBackend(const MlmBackend& inner) : inner_(inner) {}
  const BackendInfo& info() const override { return inner_.info(); }
  TokenSeq tokenize(std::string_view t) const override { return inner_.tokenize(t); }
  std::vector<MaskEmbedding> mask_hidden_states(const TokenSeq&) const override {
    throw Error(ErrorCode::kBackendError, "boom");
  }
  TopKDistribution apply_output_head(std::span<const double> v, std::size_t k) const override {
    return inner_.apply_output_head(v, k);
  }
  std::vector<double> token_log_probs(const TokenSeq& t, std::span<const std::size_t> p,
                                      std::span<const TokenId> g) const override {
    return inner_.token_log_probs(t, p, g);
  }
  AttentionProfile attention_to_masks(const TokenSeq& t) const override {
    return inner_.attention_to_masks(t);
  }

 private:
  const MlmBackend& inner_;
};

}  // namespace

TEST_CASE("default min_pts") {
  CHECK(DbscanParams::default_min_pts(1) == 3);
  CHECK(DbscanParams::default_min_pts(10) == 3);
  CHECK(DbscanParams::default_min_pts(100) == 3);
  CHECK(DbscanParams::default_min_pts(150) == 5);  // 4.5 rounds away from zero
  CHECK(DbscanParams::default_min_pts(300) == 9);
  CHECK(DbscanParams::default_min_pts(1000) == 30);
}

TEST_CASE("params validation") {
  CHECK_NOTHROW(DbscanParams{2.0, 1}.validate());
  CHECK(code_of([] { DbscanParams{0.0, 3}.validate(); }) == ErrorCode::kInvalidInput);
  CHECK(code_of([] { DbscanParams{2.5, 3}.validate(); }) == ErrorCode::kInvalidInput);
  CHECK(code_of([] { DbscanParams{0.4, 0}.validate(); }) == ErrorCode::kInvalidInput);
}

TEST_CASE("embedding matrix") {
  EmbeddingMatrix m;
  m.append(MaskEmbedding{{1.0f, 2.0f}});
  m.append(MaskEmbedding{{3.0f, 4.0f}});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m.row(1)[0] == 3.0f);
  CHECK(code_of([&] { m.append(MaskEmbedding{{1.0f}}); }) == ErrorCode::kDimensionMismatch);
  CHECK(code_of([&] { m.append(MaskEmbedding{{NAN, 1.0f}}); }) == ErrorCode::kDegenerateInput);
  CHECK(code_of([] { EmbeddingMatrix(2, 2, {1.0f}); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("embed occurrences") {
  const auto m = testing::bundled_mock();
  const std::vector<std::string> sentences{
      "The closed book exam starts at nine.", "Her past is a closed book.",
      "The closed book exam starts at nine."};
  std::vector<OccurrenceRecord> records;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    records.push_back(make_record(i, sentences[i], "closed book",
                                  testing::span_of(sentences[i], "closed book"), 3));
  }
  const auto ctx = testing::contexts_for(m, sentences, "closed book");
  const auto matrix = embed_occurrences(ctx, records, m);
  CHECK(matrix.rows() == 3);
  CHECK(matrix.cols() == 8);
  CHECK(std::equal(matrix.row(0).begin(), matrix.row(0).end(), matrix.row(2).begin()));

  // Row 1 read straight from the tables: slot 0 plus the context embeddings.
  const auto& t = m.tables();
  std::vector<double> expect = t.slots.at(0);
  for (const char* w : {"her", "past", "is", "a", "."}) {
    const auto it = t.embeddings.find(w);
    if (it == t.embeddings.end()) continue;
    for (std::size_t j = 0; j < expect.size(); ++j) expect[j] += it->second[j];
  }
  for (std::size_t j = 0; j < expect.size(); ++j) {
    CHECK(matrix.row(1)[j] == static_cast<float>(expect[j]));
  }
}

TEST_CASE("embedding errors name the record") {
  const auto m = testing::bundled_mock();
  const FailingBackend failing(m);
  const std::vector<std::string> s{"Her past is a closed book."};
  const std::vector<OccurrenceRecord> r{
      make_record(41, s[0], "closed book", testing::span_of(s[0], "closed book"), 3)};
  try {
    embed_occurrences(testing::contexts_for(m, s, "closed book"), r, failing);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBackendError);
    CHECK(std::string(e.what()) == "BackendError: record 41: boom");
  }
}

TEST_CASE("two separated blobs") {
  std::mt19937 rng(3);
  auto rows = blob({1, 0, 0, 0}, 10, 0.05, rng);
  const auto second = blob({0, 0, 1, 0}, 10, 0.05, rng);
  rows.insert(rows.end(), second.begin(), second.end());
  const auto model = dbscan_cosine(matrix_of(rows), DbscanParams{0.4, 3});
  CHECK(model.cluster_count() == 2);
  CHECK(std::count(model.labels.begin(), model.labels.end(), kOutlierLabel) == 0);
  for (std::size_t i = 0; i < 10; ++i) CHECK(model.labels[i] == 0);
  for (std::size_t i = 10; i < 20; ++i) CHECK(model.labels[i] == 1);
  CHECK_FALSE(model.all_outlier_fallback);
}

TEST_CASE("isolated vector is an outlier") {
  std::mt19937 rng(5);
  auto rows = blob({1, 1, 0}, 10, 0.05, rng);
  rows.push_back({0, 0, 1});
  const auto model = dbscan_cosine(matrix_of(rows), DbscanParams{0.4, 3});
  CHECK(model.labels.back() == kOutlierLabel);
  CHECK(model.cluster_count() == 1);
  CHECK(model.members(0).size() == 10);
}

TEST_CASE("neighbourhoods include the point itself") {
  const auto rows = std::vector<std::vector<double>>{{1, 0}, {1, 0.01}, {0, 1}};
  CHECK(dbscan_labels(matrix_of(rows), DbscanParams{0.1, 2}) == std::vector<int>{0, 0, -1});
  CHECK(dbscan_labels(matrix_of(rows), DbscanParams{0.1, 1}) == std::vector<int>{0, 0, 1});
}

TEST_CASE("border point goes to the first cluster that reaches it") {
  // Angles in degrees; eps 0.015 is about 9.9 degrees.
  auto at = [](double deg) {
    const double r = deg * M_PI / 180.0;
    return std::vector<double>{std::cos(r), std::sin(r)};
  };
  const std::vector<std::vector<double>> high{at(24), at(26), at(28), at(30), at(32)};
  const std::vector<std::vector<double>> low{at(6), at(4), at(2), at(0), at(-2)};
  // 15 degrees sits 9 degrees from both chains: a border point of each.
  std::vector<std::vector<double>> rows{at(15)};
  rows.insert(rows.end(), high.begin(), high.end());
  rows.insert(rows.end(), low.begin(), low.end());
  const DbscanParams p{0.015, 4};
  auto labels = dbscan_labels(matrix_of(rows), p);
  CHECK(labels == std::vector<int>{0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
  CHECK(labels == testing::reference_dbscan(stored(matrix_of(rows)), p.eps, p.min_pts));

  // List the low chain first and it claims the border point instead.
  rows = {at(15)};
  rows.insert(rows.end(), low.begin(), low.end());
  rows.insert(rows.end(), high.begin(), high.end());
  labels = dbscan_labels(matrix_of(rows), p);
  CHECK(labels == std::vector<int>{0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
  const auto model = dbscan_cosine(matrix_of(rows), p);
  CHECK(model.members(0) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
}

TEST_CASE("labels follow first appearance") {
  std::mt19937 rng(9);
  auto rows = blob({0, 1, 0}, 4, 0.01, rng);
  const auto other = blob({1, 0, 0}, 4, 0.01, rng);
  rows.insert(rows.begin() + 1, other.begin(), other.end());
  const auto labels = dbscan_labels(matrix_of(rows), DbscanParams{0.3, 3});
  CHECK(labels == std::vector<int>{0, 1, 1, 1, 1, 0, 0, 0});
}

TEST_CASE("all outliers fall back to one cluster") {
  const std::vector<std::vector<double>> rows{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const auto model = dbscan_cosine(matrix_of(rows), DbscanParams{0.4, 3});
  CHECK(model.all_outlier_fallback);
  CHECK(model.labels == std::vector<int>{0, 0, 0});
  REQUIRE(model.cluster_count() == 1);
  const auto& c = model.centroids.at(0);
  CHECK(c == std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});
}

TEST_CASE("zero rows are degenerate") {
  const std::vector<std::vector<double>> rows{{1, 0}, {0, 0}};
  CHECK(code_of([&] { dbscan_cosine(matrix_of(rows), DbscanParams{}); }) ==
        ErrorCode::kDegenerateInput);
  CHECK(code_of([] { dbscan_cosine(EmbeddingMatrix{}, DbscanParams{}); }) ==
        ErrorCode::kInvalidInput);
}

TEST_CASE("centroids") {
  const std::vector<std::vector<double>> same{{2, 4}, {2, 4}, {2, 4}};
  const auto m1 = matrix_of(same);
  const std::vector<int> one{0, 0, 0};
  CHECK(compute_centroids(m1, one).at(0) == std::vector<double>{2, 4});

  const std::vector<std::vector<double>> uv{{1, 3}, {3, 5}, {9, 9}};
  const std::vector<int> labels{0, 0, -1};
  const auto c = compute_centroids(matrix_of(uv), labels);
  CHECK(c.size() == 1);
  CHECK(c.at(0) == std::vector<double>{2, 4});

  const auto normalized = compute_centroids(matrix_of({{3, 4}, {0, 2}}), std::vector<int>{0, 0},
                                            true);
  CHECK(normalized.at(0)[0] == doctest::Approx(0.3));
  CHECK(normalized.at(0)[1] == doctest::Approx(0.9));
  const std::vector<int> too_few{0, 0};
  CHECK(code_of([&] { compute_centroids(m1, too_few); }) == ErrorCode::kInvalidInput);
}

TEST_CASE("select cluster") {
  ClusterModel model;
  model.centroids[0] = {1, 0};
  model.centroids[1] = {0, 1};
  const std::vector<float> exact{0, 1};
  CHECK(select_cluster(exact, model) == 1);
  const std::vector<float> tie{1, 1};
  CHECK(select_cluster(tie, model) == 0);
  const std::vector<float> scaled{0.2f, 9.0f};
  CHECK(select_cluster(scaled, model) == 1);
  CHECK(code_of([&] { select_cluster(tie, ClusterModel{}); }) == ErrorCode::kNoClusters);
  const std::vector<float> zero{0, 0};
  CHECK(code_of([&] { select_cluster(zero, model); }) == ErrorCode::kDegenerateInput);
  const std::vector<float> short_target{1};
  CHECK(code_of([&] { select_cluster(short_target, model); }) == ErrorCode::kDimensionMismatch);
}

TEST_CASE("select cluster against hand cosines") {
  ClusterModel model;
  model.centroids[0] = {3, 1, 0};
  model.centroids[1] = {1, 2, 2};
  const std::vector<float> target{1, 1, 1};
  // cos to c0 = 4 / (sqrt3 * sqrt10) = 0.730; to c1 = 5 / (sqrt3 * 3) = 0.962.
  CHECK(cosine_similarity(std::vector<double>{1, 1, 1}, model.centroids[0]) ==
        doctest::Approx(4.0 / (std::sqrt(3.0) * std::sqrt(10.0))));
  CHECK(select_cluster(target, model) == 1);
}

TEST_CASE("agreement with the reference implementation") {
  std::mt19937 rng(1234);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<double>> centres(3, std::vector<double>(6));
    for (auto& c : centres) {
      for (auto& x : c) x = g(rng);
    }
    for (int i = 0; i < 40; ++i) {
      auto v = centres[static_cast<std::size_t>(i % 3)];
      for (auto& x : v) x += 0.6 * g(rng);
      rows.push_back(v);
    }
    const auto m = matrix_of(rows);
    for (double eps : {0.1, 0.3, 0.5}) {
      for (std::size_t min_pts : {2, 4}) {
        REQUIRE(dbscan_labels(m, DbscanParams{eps, min_pts}) ==
                testing::reference_dbscan(stored(m), eps, min_pts));
      }
    }
  }
}

TEST_CASE("scale invariance") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-1, 1), s(0.1, 50);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<double>> rows(30, std::vector<double>(5));
    for (auto& r : rows) {
      for (auto& x : r) x = u(rng);
    }
    auto scaled = rows;
    for (auto& r : scaled) {
      const double f = s(rng);
      for (auto& x : r) x *= f;
    }
    const DbscanParams p{0.35, 3};
    const auto a = dbscan_cosine(matrix_of(rows), p);
    const auto b = dbscan_cosine(matrix_of(scaled), p);
    // Labels may only differ on pairs sitting within float rounding of eps.
    CHECK(a.labels == b.labels);

    const double f = s(rng);
    auto uniform = rows;
    for (auto& r : uniform) {
      for (auto& x : r) x *= f;
    }
    const auto c = dbscan_cosine(matrix_of(uniform), p);
    const std::vector<float> target{0.3f, -0.2f, 0.5f, 0.1f, 0.9f};
    CHECK(select_cluster(target, a) == select_cluster(target, c));
  }
}

TEST_CASE("row permutations permute labels") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::vector<double>> rows(25, std::vector<double>(4));
    for (auto& r : rows) {
      for (auto& x : r) x = u(rng);
    }
    std::vector<std::size_t> perm(rows.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<double>> shuffled;
    for (auto i : perm) shuffled.push_back(rows[i]);

    // Core points are order independent; compare the induced partition of
    // core points only, since border ties may resolve differently.
    const DbscanParams p{0.3, 4};
    const auto a = dbscan_labels(matrix_of(rows), p);
    const auto b = dbscan_labels(matrix_of(shuffled), p);
    const auto st = stored(matrix_of(rows));
    auto is_core = [&](std::size_t i) {
      std::size_t deg = 0;
      for (const auto& r : st) deg += testing::cosine_distance(st[i], r) <= p.eps;
      return deg >= p.min_pts;
    };
    std::map<int, int> forward;
    for (std::size_t k = 0; k < perm.size(); ++k) {
      const auto i = perm[k];
      CHECK((a[i] == kOutlierLabel) == (b[k] == kOutlierLabel));
      if (!is_core(i)) continue;
      const auto [it, fresh] = forward.emplace(a[i], b[k]);
      CHECK(it->second == b[k]);
    }
  }
}
