#include "mwepara/artifact.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <atomic>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "mwepara/error.hpp"

namespace mwepara {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kFormat = "mwepara-artifact/1";

std::string sha256_hex(std::string_view data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error(ErrorCode::kIoError, "SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
}

json clusters_to_json(const ParaphraseArtifact& a) {
  json centroids = json::array();
  for (const auto& [id, v] : a.clusters.centroids) {
    centroids.push_back({{"id", id}, {"vector", v}});
  }
  return json{{"checkpoint", a.checkpoint},
              {"n", a.embeddings.rows()},
              {"d", a.embeddings.cols()},
              {"params", {{"eps", a.clusters.params.eps}, {"min_pts", a.clusters.params.min_pts}}},
              {"labels", a.clusters.labels},
              {"centroids", std::move(centroids)},
              {"all_outlier_fallback", a.clusters.all_outlier_fallback}};
}

ClusterModel clusters_from_json(const json& j) {
  ClusterModel m;
  m.labels = j.at("labels").get<std::vector<int>>();
  m.params.eps = j.at("params").at("eps").get<double>();
  m.params.min_pts = j.at("params").at("min_pts").get<std::size_t>();
  m.all_outlier_fallback = j.value("all_outlier_fallback", false);
  for (const auto& c : j.at("centroids")) {
    m.centroids[c.at("id").get<int>()] = c.at("vector").get<std::vector<double>>();
  }
  return m;
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

}  // namespace

const RerankedSet* ParaphraseArtifact::reranked_for(int cluster_id) const {
  for (const auto& r : reranked) {
    if (r.cluster_id == cluster_id) return &r;
  }
  return nullptr;
}

std::string encode_embeddings(const EmbeddingMatrix& matrix) {
  std::string out;
  out.reserve(8 + matrix.data().size() * 4);
  put_u32(out, static_cast<std::uint32_t>(matrix.rows()));
  put_u32(out, static_cast<std::uint32_t>(matrix.cols()));
  for (float v : matrix.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

EmbeddingMatrix decode_embeddings(std::string_view bytes) {
  if (bytes.size() < 8) throw Error(ErrorCode::kIoError, "embeddings.bin is truncated");
  const std::size_t rows = get_u32(bytes, 0);
  const std::size_t cols = get_u32(bytes, 4);
  if (bytes.size() != 8 + rows * cols * 4) {
    throw Error(ErrorCode::kIoError, "embeddings.bin size does not match its header");
  }
  std::vector<float> data(rows * cols);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::bit_cast<float>(get_u32(bytes, 8 + 4 * i));
  }
  return EmbeddingMatrix(rows, cols, std::move(data));
}

ArtifactPayload serialize_payload(const ParaphraseArtifact& a) {
  std::string sentences;
  for (const auto& r : a.records) sentences += record_to_json(r).dump() + "\n";

  json candidates = json::array();
  for (const auto& set : a.candidates) {
    json list = json::array();
    for (const auto& c : set.candidates) list.push_back(candidate_to_json(c));
    candidates.push_back({{"cluster_id", set.cluster_id}, {"candidates", std::move(list)}});
  }
  json reranked = json::array();
  for (const auto& set : a.reranked) reranked.push_back(reranked_to_json(set));

  return {
      {"sentences.jsonl", std::move(sentences)},
      {"embeddings.bin", encode_embeddings(a.embeddings)},
      {"clusters.json", dump(clusters_to_json(a))},
      {"candidates.json", dump(json{{"mwe", a.mwe_surface}, {"clusters", std::move(candidates)}})},
      {"reranked.json", dump(json{{"mwe", a.mwe_surface}, {"clusters", std::move(reranked)}})},
  };
}

std::string compute_content_hash(const ParaphraseArtifact& a, const ArtifactPayload& payload) {
  std::string buffer;
  auto add = [&](std::string_view name, std::string_view bytes) {
    buffer += name;
    buffer.push_back('\0');
    put_u32(buffer, static_cast<std::uint32_t>(bytes.size()));
    buffer += bytes;
  };
  add("mwe", a.mwe_surface);
  add("checkpoint", a.checkpoint);
  add("config", a.config.dump());
  for (const auto& [name, bytes] : payload) add(name, bytes);
  return sha256_hex(buffer);
}

std::string artifact_dir_name(std::string_view mwe) {
  std::string slug;
  for (unsigned char c : mwe) {
    if (std::isalnum(c) && c < 0x80) {
      slug.push_back(static_cast<char>(std::tolower(c)));
    } else if (slug.empty() || slug.back() != '_') {
      slug.push_back('_');
    }
  }
  if (slug.size() > 48) slug.resize(48);
  return slug + "-" + sha256_hex(mwe).substr(0, 8);
}

fs::path artifact_path(const fs::path& store_root, std::string_view mwe) {
  return store_root / artifact_dir_name(mwe);
}

fs::path write_artifact(const ParaphraseArtifact& a, const fs::path& store_root) {
  static std::atomic<unsigned> counter{0};
  const auto payload = serialize_payload(a);
  const auto hash = compute_content_hash(a, payload);
  if (!a.content_hash.empty() && a.content_hash != hash) {
    throw Error(ErrorCode::kIoError, "artifact content hash is stale");
  }

  json files = json::array();
  for (const auto& [name, bytes] : payload) files.push_back(name);
  const json manifest{{"format", kFormat},
                      {"mwe", a.mwe_surface},
                      {"checkpoint", a.checkpoint},
                      {"config", a.config},
                      {"n_records", a.records.size()},
                      {"hidden_size", a.embeddings.cols()},
                      {"n_clusters", a.clusters.cluster_count()},
                      {"files", std::move(files)},
                      {"content_hash", hash}};

  const auto name = artifact_dir_name(a.mwe_surface);
  const auto final_dir = store_root / name;
  const auto suffix = std::to_string(::getpid()) + "-" + std::to_string(counter++);
  const auto tmp_dir = store_root / (".tmp-" + name + "-" + suffix);
  try {
    fs::create_directories(store_root);
    fs::create_directory(tmp_dir);
    for (const auto& [file, bytes] : payload) write_file(tmp_dir / file, bytes);
    write_file(tmp_dir / "manifest.json", dump(manifest));
    if (fs::exists(final_dir)) {
      const auto old_dir = store_root / (".old-" + name + "-" + suffix);
      fs::rename(final_dir, old_dir);
      fs::rename(tmp_dir, final_dir);
      fs::remove_all(old_dir);
    } else {
      fs::rename(tmp_dir, final_dir);
    }
  } catch (const fs::filesystem_error& e) {
    std::error_code ignored;
    fs::remove_all(tmp_dir, ignored);
    throw Error(ErrorCode::kIoError, e.what());
  } catch (...) {
    std::error_code ignored;
    fs::remove_all(tmp_dir, ignored);
    throw;
  }
  return final_dir;
}

ParaphraseArtifact read_artifact(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::kMissingArtifact, "no artifact at " + dir.string());
  }
  try {
    const auto manifest = json::parse(read_file(dir / "manifest.json"));
    if (manifest.at("format").get<std::string>() != kFormat) {
      throw Error(ErrorCode::kIoError, "unsupported artifact format in " + dir.string());
    }
    ParaphraseArtifact a;
    a.mwe_surface = manifest.at("mwe").get<std::string>();
    a.checkpoint = manifest.at("checkpoint").get<std::string>();
    a.config = manifest.at("config");

    ArtifactPayload payload;
    for (const auto& name : manifest.at("files")) {
      const auto file = name.get<std::string>();
      payload.emplace_back(file, read_file(dir / file));
    }
    a.content_hash = compute_content_hash(a, payload);
    if (a.content_hash != manifest.at("content_hash").get<std::string>()) {
      throw Error(ErrorCode::kIoError, "content hash mismatch in " + dir.string());
    }
    auto file = [&](std::string_view name) -> const std::string& {
      for (const auto& [n, bytes] : payload) {
        if (n == name) return bytes;
      }
      throw Error(ErrorCode::kIoError, "artifact lacks " + std::string(name));
    };

    std::istringstream sentences(file("sentences.jsonl"));
    for (std::string line; std::getline(sentences, line);) {
      if (!line.empty()) a.records.push_back(record_from_json(json::parse(line), a.mwe_surface));
    }
    a.embeddings = decode_embeddings(file("embeddings.bin"));
    a.clusters = clusters_from_json(json::parse(file("clusters.json")));
    const auto candidates = json::parse(file("candidates.json"));
    for (const auto& c : candidates.at("clusters")) {
      CandidateSet set;
      set.mwe_surface = a.mwe_surface;
      set.cluster_id = c.at("cluster_id").get<int>();
      for (const auto& cand : c.at("candidates")) set.candidates.push_back(candidate_from_json(cand));
      a.candidates.push_back(std::move(set));
    }
    const auto reranked = json::parse(file("reranked.json"));
    for (const auto& r : reranked.at("clusters")) {
      a.reranked.push_back(reranked_from_json(r));
    }
    if (a.records.size() != a.embeddings.rows() ||
        a.clusters.labels.size() != a.embeddings.rows()) {
      throw Error(ErrorCode::kIoError, "artifact files disagree on N in " + dir.string());
    }
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kIoError, "malformed artifact " + dir.string() + ": " + e.what());
  }
}

}  // namespace mwepara
