// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <unistd.h>

#include "dbscan_oracle.hpp"
#include "mwepara/artifact.hpp"
#include "mwepara/clustering.hpp"
#include "mwepara/generation.hpp"
#include "mwepara/pipeline.hpp"
#include "mwepara/reranking.hpp"
#include "mwepara/text.hpp"
#include "rerank_oracle.hpp"
#include "test_support.hpp"

using namespace mwepara;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
  Outcome out;
  try {
    out = check();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  if (!out.pass) ++failures;
  std::printf("%s  %s%s%s\n", out.pass ? "PASS" : "FAIL", name, out.detail.empty() ? "" : "  ",
              out.detail.c_str());
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Candidate cand(const MockBackend& m, const std::string& surface, double score) {
  Candidate c;
  c.surface = surface;
  c.gen_score = score;
  for (const auto& w : text::split_whitespace(surface)) c.token_ids.push_back(m.id_of(w));
  c.origin = c.token_ids.size() == 1 ? CandidateOrigin::kOneMask
                                     : CandidateOrigin::kTwoMaskForward;
  return c;
}

Outcome dbscan_oracle() {
  Outcome out;
  const auto t0 = Clock::now();
  std::size_t instances = 0, clusters = 0, noise = 0;
  for (std::uint32_t seed = 0; seed < 100; ++seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> centres(4, std::vector<double>(8));
    for (auto& c : centres) {
      for (auto& x : c) x = g(rng);
    }
    EmbeddingMatrix m;
    for (int i = 0; i < 50; ++i) {
      auto v = centres[rng() % centres.size()];
      for (auto& x : v) x += 0.5 * g(rng);
      m.append(MaskEmbedding{{v.begin(), v.end()}});
    }
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < m.rows(); ++i) rows.emplace_back(m.row(i).begin(), m.row(i).end());
    for (double eps : {0.2, 0.4}) {
      for (std::size_t min_pts : {3, 5}) {
        ++instances;
        const auto labels = dbscan_labels(m, DbscanParams{eps, min_pts});
        out.require(labels == testing::reference_dbscan(rows, eps, min_pts),
                    "mismatch at seed " + std::to_string(seed));
        clusters += static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end()) + 1);
        noise += static_cast<std::size_t>(std::count(labels.begin(), labels.end(), -1));
      }
    }
  }
  const double t = seconds_since(t0);
  out.require(t < 10.0, "took " + fmt(t) + " s");
  if (out.pass) {
    out.detail = std::to_string(instances) + " instances, " + std::to_string(clusters) +
                 " clusters, " + std::to_string(noise) + " noise points, " + fmt(t) + " s";
  }
  return out;
}

Outcome min_pts_formula() {
  Outcome out;
  out.require(DbscanParams::default_min_pts(10) == 3, "N=10");
  out.require(DbscanParams::default_min_pts(100) == 3, "N=100");
  out.require(DbscanParams::default_min_pts(300) == 9, "N=300");
  return out;
}

Outcome single_member_reduction() {
  Outcome out;
  const auto m = testing::bundled_mock();
  std::ifstream corpus(testing::kDataDir + "/mini_corpus.txt");
  std::vector<std::string> lines;
  for (std::string line; std::getline(corpus, line);) {
    if (line.find("closed book") != std::string::npos) lines.push_back(line);
  }
  double worst = 0.0;
  for (const auto& line : lines) {
    const auto ctxs = testing::contexts_for(m, {line}, "closed book");
    const auto state = m.mask_hidden_states(ctxs[0].with(make_masks(m.info(), 1)))[0].as_double();
    const auto direct = m.apply_output_head(state, 50);
    for (const auto& c : generate_one_token(ctxs, m)) {
      const auto it = std::find_if(direct.entries.begin(), direct.entries.end(),
                                   [&](const TopKEntry& e) { return e.id == c.token_ids[0]; });
      out.require(it != direct.entries.end(), "candidate missing from direct prediction");
      if (it != direct.entries.end()) worst = std::max(worst, std::abs(it->probability - c.gen_score));
    }
  }
  out.require(worst <= 1e-12, "max deviation " + fmt(worst));
  if (out.pass) out.detail = std::to_string(lines.size()) + " sentences, max deviation " + fmt(worst);
  return out;
}

Outcome two_token_arithmetic() {
  Outcome out;
  const std::vector<std::pair<double, double>> pairs = {
      {0.25, 0.04}, {1.0, 1.0}, {0.5, 0.5}, {0.9, 0.1}, {1e-6, 0.3}};
  for (const auto& [a, b] : pairs) {
    out.require(std::abs(joint_score(a, b) - std::sqrt(a * b)) <= 1e-12, "sqrt product");
  }
  out.require(std::abs(joint_score(0.25, 0.04) - 0.1) <= 1e-12, "sqrt(0.25 * 0.04) != 0.1");

  const std::array<std::array<double, 3>, 3> joint = {{
      {0.20, 0.10, 0.05},
      {0.15, 0.05, 0.10},
      {0.05, 0.20, 0.10},
  }};
  const auto m = testing::mock_from(testing::joint_fixture(joint));
  const auto ctxs = testing::contexts_for(m, {"ctx p q"}, "p q");
  GenerationConfig cfg;
  cfg.two_token_k = 9;
  const auto cands = generate_two_token(ctxs, m, cfg);
  out.require(cands.size() == 9, "expected 9 phrases, got " + std::to_string(cands.size()));
  std::set<std::string> surfaces;
  for (const auto& c : cands) surfaces.insert(c.surface);
  out.require(surfaces.size() == cands.size(), "duplicate surfaces after dedup");

  // Each direction on its own must reproduce sqrt(J).
  double worst = 0.0;
  const auto& info = m.info();
  const auto p1 = m.apply_output_head(average_mask_state(ctxs, m, make_masks(info, 2), 0), 50);
  const auto p2 = m.apply_output_head(average_mask_state(ctxs, m, make_masks(info, 2), 1), 50);
  auto prob = [](const TopKDistribution& d, TokenId id) {
    for (const auto& e : d.entries) {
      if (e.id == id) return e.probability;
    }
    return 0.0;
  };
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const std::string a(1, static_cast<char>('a' + i)), b(1, static_cast<char>('a' + j));
      TokenSeq fwd;
      fwd.push_back(m.id_of(a), a, false);
      fwd.append(make_masks(info, 1));
      TokenSeq bwd = make_masks(info, 1);
      bwd.push_back(m.id_of(b), b, false);
      const double f = joint_score(
          prob(p1, m.id_of(a)),
          prob(m.apply_output_head(average_mask_state(ctxs, m, fwd, 0), 50), m.id_of(b)));
      const double r = joint_score(
          prob(p2, m.id_of(b)),
          prob(m.apply_output_head(average_mask_state(ctxs, m, bwd, 0), 50), m.id_of(a)));
      worst = std::max(worst, std::abs(f - r));
      const auto it = std::find_if(cands.begin(), cands.end(),
                                   [&](const Candidate& c) { return c.surface == a + " " + b; });
      out.require(it != cands.end(), "missing phrase " + a + " " + b);
      if (it != cands.end()) {
        out.require(std::abs(it->gen_score - std::sqrt(joint[i][j])) <= 1e-12,
                    "phrase score " + a + " " + b);
      }
    }
  }
  out.require(worst <= 1e-9, "forward/backward gap " + fmt(worst));
  if (out.pass) out.detail = "forward/backward gap " + fmt(worst);
  return out;
}

Outcome edit_filter() {
  Outcome out;
  out.require(text::normalized_edit_distance("swan songs", "swan song") == 0.1,
              "ratio of 'swan songs' is not 0.1");
  auto c = [](std::string s) { return Candidate{{0}, std::move(s), 0.5, CandidateOrigin::kOneMask}; };
  const auto kept =
      filter_near_copies({c("swan songs"), c("final performance"), c("swan song")}, "swan song");
  out.require(kept.size() == 1 && kept[0].surface == "final performance",
              "expected only 'final performance' to survive");
  return out;
}

Outcome rerank_oracle() {
  Outcome out;
  for (std::uint32_t seed = 1; seed <= 25; ++seed) {
    const testing::ExplicitScores ex(seed);
    const auto m = testing::mock_from(ex.fixture());
    const auto ctxs = testing::contexts_for(m, ex.sentences, "mw");
    CandidateSet set;
    set.mwe_surface = "mw";
    for (std::size_t i = 0; i < 3; ++i) set.candidates.push_back(cand(m, ex.candidates[i], 0.3));

    // Exhaustive enumeration: the expected order is the permutation whose
    // oracle scores never increase.
    std::vector<std::size_t> perm = {0, 1, 2}, expected;
    do {
      if (ex.expected(perm[0]) >= ex.expected(perm[1]) &&
          ex.expected(perm[1]) >= ex.expected(perm[2])) {
        expected = perm;
        break;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));

    // Both strategies mask all five context words here; a consecutive span
    // cannot, since it never straddles the MWE.
    for (auto s : {MaskStrategy::kAttention, MaskStrategy::kRandomWords}) {
      RerankConfig cfg;
      cfg.strategy = s;
      cfg.seed = seed;
      const auto got = rerank(set, ctxs, m, cfg);
      out.require(got.plan.per_record == ex.plan.per_record, "plan differs from the oracle plan");
      for (std::size_t k = 0; k < 3; ++k) {
        out.require(got.ranked[k].candidate.surface == ex.candidates[expected[k]],
                    "order differs at seed " + std::to_string(seed));
        out.require(std::abs(got.ranked[k].rerank_score - ex.expected(expected[k])) <= 1e-12,
                    "score differs at seed " + std::to_string(seed));
        out.require(got.ranked[k].rerank_score ==
                        outer_score(got.ranked[k].candidate, ctxs, got.plan, m),
                    "candidate not scored against the shared plan");
      }
    }
  }

  // Plan constancy on the bundled mock, where plans depend on the data.
  const auto m = testing::bundled_mock();
  const auto ctxs = testing::contexts_for(
      m,
      {"The final exam was closed book and very strict.",
       "Our professor set a closed book test on Monday."},
      "closed book");
  CandidateSet set;
  for (const char* s : {"exam", "test", "final exam"}) set.candidates.push_back(cand(m, s, 0.2));
  set.candidates[0].gen_score = 0.5;
  set.candidates[2].gen_score = 0.1;
  for (auto s : {MaskStrategy::kAttention, MaskStrategy::kRandomWords,
                 MaskStrategy::kRandomConsecutiveSpan}) {
    RerankConfig cfg;
    cfg.strategy = s;
    const auto got = rerank(set, ctxs, m, cfg);
    out.require(got.plan == plan_masks(ctxs, m, cfg), "plan depends on the candidates");
    for (const auto& r : got.ranked) {
      out.require(r.rerank_score == outer_score(r.candidate, ctxs, got.plan, m),
                  "candidate scored against a different plan");
    }
  }
  RerankConfig none;
  none.strategy = MaskStrategy::kNone;
  const auto ordered = rerank(set, ctxs, m, none);
  std::vector<std::string> order;
  for (const auto& r : ordered.ranked) order.push_back(r.candidate.surface);
  out.require(order == std::vector<std::string>{"exam", "test", "final exam"},
              "strategy none does not keep generation order");
  return out;
}

Outcome length_fairness() {
  Outcome out;
  const auto m = testing::mock_from(R"(
hidden_size 2
vocab mw x y a b c
embed a 1 0
embed b 0 1
embed c 1 1
output a 0 1 2
output b 0.5 -1 1
output c 0 2 -1
slot 0 0.3 0.1
)");
  const auto ctxs = testing::contexts_for(m, {"a b mw c a", "c c mw b"}, "mw");
  double worst = 0.0;
  for (auto s : {MaskStrategy::kAttention, MaskStrategy::kRandomWords,
                 MaskStrategy::kRandomConsecutiveSpan}) {
    CandidateSet set;
    set.candidates = {cand(m, "x", 0.5), cand(m, "x y", 0.2)};
    RerankConfig cfg;
    cfg.strategy = s;
    cfg.mask_words = 2;
    const auto got = rerank(set, ctxs, m, cfg);
    worst = std::max(worst, std::abs(got.ranked[0].rerank_score - got.ranked[1].rerank_score));
  }
  out.require(worst <= 1e-12, "score gap " + fmt(worst));
  return out;
}

Outcome end_to_end_determinism() {
  Outcome out;
  const auto t0 = Clock::now();
  const auto m = testing::bundled_mock();
  char tmpl[] = "/tmp/mwepara-accept-XXXXXX";
  const fs::path root = ::mkdtemp(tmpl);
  std::vector<std::string> hashes;
  std::vector<std::map<std::string, std::string>> files;
  for (int run = 0; run < 2; ++run) {
    std::ifstream corpus(testing::kDataDir + "/mini_corpus.txt");
    const auto a = build_artifact("closed book", corpus, m, PipelineConfig{});
    const auto dir = write_artifact(a, root / std::to_string(run));
    hashes.push_back(read_artifact(dir).content_hash);
    std::map<std::string, std::string> bytes;
    for (const auto& e : fs::directory_iterator(dir)) {
      std::ifstream in(e.path(), std::ios::binary);
      bytes[e.path().filename().string()] =
          std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    files.push_back(std::move(bytes));
    out.require(a.clusters.cluster_count() == 2, "expected 2 senses");
  }
  fs::remove_all(root);
  const double t = seconds_since(t0);
  out.require(hashes[0] == hashes[1], "content hashes differ");
  out.require(files[0] == files[1], "artifact bytes differ");
  out.require(t < 5.0, "took " + fmt(t) + " s");
  if (out.pass) out.detail = "hash " + hashes[0].substr(0, 12) + " in " + fmt(t) + " s";
  return out;
}

Outcome precision_harness() {
  Outcome out;
  std::vector<std::vector<std::string>> preds(4);
  const std::vector<std::string> golds = {"g0", "g1", "g2", "g3"};
  const int planted[4] = {1, 3, 7, 0};  // 0 = absent
  for (int i = 0; i < 4; ++i) {
    for (int r = 1; r <= 10; ++r) {
      preds[i].push_back(r == planted[i] ? golds[i] : "other" + std::to_string(r));
    }
  }
  const std::vector<std::size_t> ks = {1, 5, 10};
  const auto p = precision_at_k(preds, golds, ks);
  out.require(p.at(1) == 0.25 && p.at(5) == 0.5 && p.at(10) == 0.75,
              "got " + fmt(p.at(1)) + "/" + fmt(p.at(5)) + "/" + fmt(p.at(10)));

  std::mt19937 rng(11);
  std::vector<std::size_t> all_k;
  for (std::size_t k = 1; k <= 15; ++k) all_k.push_back(k);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<std::string>> rp(6);
    std::vector<std::string> rg;
    for (auto& r : rp) {
      for (int i = 0; i < 15; ++i) r.push_back("w" + std::to_string(rng() % 25));
      rg.push_back("w" + std::to_string(rng() % 25));
    }
    const auto q = precision_at_k(rp, rg, all_k);
    for (std::size_t k = 2; k <= 15; ++k) {
      out.require(q.at(k) >= q.at(k - 1), "not monotone in k");
    }
  }
  return out;
}

}  // namespace

int main() {
  report("dbscan matches brute-force reference", dbscan_oracle);
  report("min_pts formula", min_pts_formula);
  report("single-member one-token reduction", single_member_reduction);
  report("two-token score arithmetic and symmetry", two_token_arithmetic);
  report("edit-distance filter", edit_filter);
  report("rerank oracle and plan constancy", rerank_oracle);
  report("length fairness", length_fairness);
  report("end-to-end determinism", end_to_end_determinism);
  report("precision at k harness", precision_harness);
  std::printf("%d failed\n", failures);
  return failures == 0 ? 0 : 1;
}
