// Command-line front end: collect, build, paraphrase, eval, inspect and a
// mock wire server for exercising the sidecar protocol without a model.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mwepara/artifact.hpp"
#include "mwepara/config.hpp"
#include "mwepara/error.hpp"
#include "mwepara/mock_backend.hpp"
#include "mwepara/pipeline.hpp"
#include "mwepara/sidecar.hpp"

namespace {

using mwepara::Error;
using mwepara::ErrorCode;

struct BackendOptions {
  std::string mock_fixture;
  std::string sidecar;
  int timeout = 60;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--mock", mock_fixture, "Mock MLM fixture file")->check(CLI::ExistingFile);
    cmd->add_option("--sidecar", sidecar,
                    std::string("Sidecar host:port (default: $") + mwepara::kSidecarEnvVar +
                        " or " + mwepara::kDefaultSidecarAddress + ")");
    cmd->add_option("--timeout", timeout, "Sidecar request timeout in seconds");
    cmd->get_option("--mock")->excludes(cmd->get_option("--sidecar"));
  }

  std::unique_ptr<mwepara::MlmBackend> make() const {
    if (!mock_fixture.empty()) {
      return std::make_unique<mwepara::MockBackend>(mwepara::load_mock_fixture(mock_fixture));
    }
    std::string address = sidecar;
    if (address.empty()) {
      const char* env = std::getenv(mwepara::kSidecarEnvVar);
      address = env && *env ? env : mwepara::kDefaultSidecarAddress;
    }
    return std::make_unique<mwepara::SidecarBackend>(mwepara::parse_sidecar_address(address),
                                                     timeout);
  }
};

struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> settings;
  std::optional<double> eps;
  std::optional<std::string> min_pts;
  std::optional<std::string> strategy;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_keep;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_file, "Key-value config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("-s,--set", settings, "Override a setting: key=value (repeatable)");
    cmd->add_option("--eps", eps, "DBSCAN cosine-distance radius");
    cmd->add_option("--min-pts", min_pts, "DBSCAN density threshold, or 'auto'");
    cmd->add_option("--strategy", strategy,
                    "Rerank masking: attention|random_words|random_consecutive_span|none");
    cmd->add_option("--seed", seed, "Seed for random masking strategies");
    cmd->add_option("--max-keep", max_keep, "Maximum sentences kept per MWE");
  }

  // Defaults, then the config file, then flags. Checkpoint presets apply
  // later, only where eps is still unset.
  mwepara::PipelineConfig resolve() const {
    mwepara::PipelineConfig config;
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw Error(ErrorCode::kIoError, "cannot open " + config_file);
      for (const auto& [key, value] : mwepara::read_key_values(in)) {
        mwepara::apply_setting(config, key, value);
      }
    }
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::kInvalidInput, "expected key=value, got '" + s + "'");
      }
      mwepara::apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
    }
    if (eps) mwepara::apply_setting(config, "eps", nlohmann::json(*eps).dump());
    if (min_pts) mwepara::apply_setting(config, "min_pts", *min_pts);
    if (strategy) mwepara::apply_setting(config, "strategy", *strategy);
    if (seed) mwepara::apply_setting(config, "seed", std::to_string(*seed));
    if (max_keep) mwepara::apply_setting(config, "max_keep", std::to_string(*max_keep));
    return config;
  }
};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return in;
}

mwepara::Span parse_span(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) {
    throw Error(ErrorCode::kInvalidInput, "span must be 'begin,end'");
  }
  try {
    std::size_t used = 0;
    const auto b = std::stoull(s.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument(s);
    const auto tail = s.substr(comma + 1);
    const auto e = std::stoull(tail, &used);
    if (used != tail.size()) throw std::invalid_argument(s);
    return {static_cast<std::size_t>(b), static_cast<std::size_t>(e)};
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::kInvalidInput, "span must be 'begin,end', got '" + s + "'");
  }
}

nlohmann::json summarize(const mwepara::ParaphraseArtifact& a, std::size_t top) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& set : a.reranked) {
    nlohmann::json ranked = nlohmann::json::array();
    for (std::size_t i = 0; i < set.ranked.size() && i < top; ++i) {
      const auto& r = set.ranked[i];
      ranked.push_back({{"surface", r.candidate.surface},
                        {"gen_score", r.candidate.gen_score},
                        {"rerank_score", r.rerank_score},
                        {"origin", mwepara::origin_name(r.candidate.origin)}});
    }
    clusters.push_back({{"id", set.cluster_id},
                        {"size", a.clusters.members(set.cluster_id).size()},
                        {"candidates", std::move(ranked)}});
  }
  std::size_t outliers = 0;
  for (int l : a.clusters.labels) outliers += l == mwepara::kOutlierLabel;
  return {{"mwe", a.mwe_surface},
          {"checkpoint", a.checkpoint},
          {"records", a.records.size()},
          {"eps", a.clusters.params.eps},
          {"min_pts", a.clusters.params.min_pts},
          {"outliers", outliers},
          {"all_outlier_fallback", a.clusters.all_outlier_fallback},
          {"content_hash", a.content_hash},
          {"clusters", std::move(clusters)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised paraphrasing of multiword expressions"};
  app.require_subcommand(1);

  // collect
  auto* collect = app.add_subcommand("collect", "Extract and sparsify sentences containing an MWE");
  std::string corpus_path, mwe, out_path;
  ConfigOptions collect_cfg;
  collect->add_option("--corpus", corpus_path, "Corpus, one sentence per line")->required();
  collect->add_option("--mwe", mwe, "MWE surface form")->required();
  collect->add_option("-o,--out", out_path, "Write JSON lines here instead of stdout");
  collect_cfg.add_to(collect);

  // build
  auto* build = app.add_subcommand("build", "Build and store the paraphrase artifact for an MWE");
  std::string store = "store";
  ConfigOptions build_cfg;
  BackendOptions build_backend;
  build->add_option("--corpus", corpus_path, "Corpus, one sentence per line")->required();
  build->add_option("--mwe", mwe, "MWE surface form")->required();
  build->add_option("--store", store, "Artifact store directory");
  build_cfg.add_to(build);
  build_backend.add_to(build);

  // paraphrase
  auto* para = app.add_subcommand("paraphrase", "Paraphrase an MWE in a target sentence");
  std::string sentence, span_text;
  std::size_t top_n = 10;
  bool as_json = false;
  BackendOptions para_backend;
  para->add_option("--sentence", sentence, "Target sentence")->required();
  para->add_option("--span", span_text, "Byte span of the MWE: begin,end")->required();
  para->add_option("--mwe", mwe, "MWE surface (defaults to the spanned text)");
  para->add_option("--store", store, "Artifact store directory");
  para->add_option("-n,--top-n", top_n, "Number of paraphrases");
  para->add_flag("--json", as_json, "Print a JSON object");
  para_backend.add_to(para);

  // eval
  auto* eval = app.add_subcommand("eval", "Matching accuracy P@k over a gold file");
  std::string gold_path;
  std::vector<std::size_t> ks{1, 5, 10};
  BackendOptions eval_backend;
  eval->add_option("--gold", gold_path, "Gold JSON lines")->required()->check(CLI::ExistingFile);
  eval->add_option("--store", store, "Artifact store directory");
  eval->add_option("-k", ks, "Cutoffs")->delimiter(',');
  eval_backend.add_to(eval);

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Dump clusters and ranked candidates");
  std::string artifact_dir;
  std::size_t inspect_top = 20;
  inspect->add_option("--mwe", mwe, "MWE surface form");
  inspect->add_option("--store", store, "Artifact store directory");
  inspect->add_option("--artifact", artifact_dir, "Artifact directory (instead of --mwe)");
  inspect->add_option("-n,--top", inspect_top, "Candidates shown per cluster");

  // serve-mock
  auto* serve = app.add_subcommand("serve-mock", "Serve a mock fixture over the sidecar protocol");
  std::string fixture, host = "127.0.0.1";
  int port = 8765;
  serve->add_option("--fixture", fixture, "Mock MLM fixture")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");

  CLI11_PARSE(app, argc, argv);

  try {
    if (collect->parsed()) {
      const auto config = collect_cfg.resolve();
      auto in = open_input(corpus_path);
      const auto records = mwepara::collect_sentences(in, mwe, config.corpus);
      std::ofstream file;
      if (!out_path.empty()) {
        file.open(out_path, std::ios::binary);
        if (!file) throw Error(ErrorCode::kIoError, "cannot write " + out_path);
      }
      std::ostream& out = out_path.empty() ? std::cout : file;
      for (const auto& r : records) out << mwepara::record_to_json(r).dump() << '\n';
      std::cerr << records.size() << " records\n";
    } else if (build->parsed()) {
      const auto config = build_cfg.resolve();
      const auto backend = build_backend.make();
      auto in = open_input(corpus_path);
      const auto artifact = mwepara::build_artifact(mwe, in, *backend, config);
      const auto dir = mwepara::write_artifact(artifact, store);
      std::cout << dir.string() << '\n' << artifact.content_hash << '\n';
    } else if (para->parsed()) {
      const auto span = parse_span(span_text);
      if (mwe.empty()) {
        if (span.begin > span.end || span.end > sentence.size()) {
          throw Error(ErrorCode::kSpanMismatch, "span outside the sentence");
        }
        mwe = sentence.substr(span.begin, span.size());
      }
      const auto artifact = mwepara::read_artifact(mwepara::artifact_path(store, mwe));
      const auto backend = para_backend.make();
      const auto result = mwepara::paraphrase(sentence, span, artifact, *backend, top_n);
      if (as_json) {
        std::cout << nlohmann::json{{"cluster_id", result.cluster_id},
                                    {"paraphrases", result.surfaces}}
                         .dump()
                  << '\n';
      } else {
        for (const auto& s : result.surfaces) std::cout << s << '\n';
      }
    } else if (eval->parsed()) {
      auto in = open_input(gold_path);
      const auto gold = mwepara::read_gold(in);
      std::map<std::string, mwepara::ParaphraseArtifact> artifacts;
      for (const auto& item : gold) {
        const auto name = item.mwe();
        if (artifacts.contains(name)) continue;
        const auto dir = mwepara::artifact_path(store, name);
        if (std::filesystem::exists(dir)) artifacts.emplace(name, mwepara::read_artifact(dir));
      }
      const auto backend = eval_backend.make();
      const auto scores = mwepara::eval_patk(gold, artifacts, *backend, ks);
      nlohmann::ordered_json out = nlohmann::ordered_json::object();
      for (const auto& [k, v] : scores) out["P@" + std::to_string(k)] = v;
      out["n"] = gold.size();
      std::cout << out.dump() << '\n';
    } else if (inspect->parsed()) {
      if (artifact_dir.empty() && mwe.empty()) {
        throw Error(ErrorCode::kInvalidInput, "inspect needs --mwe or --artifact");
      }
      const auto dir = artifact_dir.empty() ? mwepara::artifact_path(store, mwe)
                                            : std::filesystem::path(artifact_dir);
      std::cout << summarize(mwepara::read_artifact(dir), inspect_top).dump(2) << '\n';
    } else if (serve->parsed()) {
      mwepara::MockBackend backend(mwepara::load_mock_fixture(fixture));
      mwepara::WireServer server(backend);
      std::cerr << "serving " << backend.info().checkpoint << " on " << host << ':' << port << '\n';
      server.listen(host, port);
    }
  } catch (const Error& e) {
    std::cerr << "mwepara: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "mwepara: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
