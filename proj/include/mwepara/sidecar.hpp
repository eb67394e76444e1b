#pragma once

// JSON-over-HTTP wire protocol between the pipeline and a model sidecar.
//
//   GET  /info           -> {checkpoint, hidden_size, vocab_size, max_length,
//                            mask_id, mask_token}
//   POST /tokenize       {text}                        -> {ids, surfaces, is_subword}
//   POST /hidden_states  {ids, mask_positions}         -> {vectors: [[...], ...]}
//   POST /output_head    {vector, k}                   -> {entries: [{id, surface,
//                                                          prob, is_subword,
//                                                          is_special}], total_prob}
//   POST /log_probs      {ids, mask_positions, targets} -> {log_probs}
//   POST /attention      {ids, mask_positions}         -> {weights}
//
// Failures answer with a non-2xx status and {"error": {code, message}}, where
// code is one of the ErrorCode names. Inputs longer than max_length are
// rejected with 413.

#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

#include "mwepara/mlm_backend.hpp"

namespace httplib {
class Client;
class Server;
}  // namespace httplib

namespace mwepara {

inline constexpr const char* kSidecarEnvVar = "MWEPARA_SIDECAR";
inline constexpr const char* kDefaultSidecarAddress = "127.0.0.1:8765";

struct SidecarAddress {
  std::string host = "127.0.0.1";
  int port = 8765;
};

// Parses "host:port" or "port".
SidecarAddress parse_sidecar_address(std::string_view address);

// Client side of the protocol. Requests are serialised over one connection.
class SidecarBackend : public MlmBackend {
 public:
  explicit SidecarBackend(const SidecarAddress& address, int timeout_seconds = 60);
  ~SidecarBackend() override;

  const BackendInfo& info() const override { return info_; }
  TokenSeq tokenize(std::string_view text) const override;
  std::vector<MaskEmbedding> mask_hidden_states(const TokenSeq& tokens) const override;
  TopKDistribution apply_output_head(std::span<const double> vector,
                                     std::size_t k) const override;
  std::vector<double> token_log_probs(const TokenSeq& tokens,
                                      std::span<const std::size_t> mask_positions,
                                      std::span<const TokenId> targets) const override;
  AttentionProfile attention_to_masks(const TokenSeq& tokens) const override;

 private:
  nlohmann::json call(const std::string& path, const nlohmann::json* body) const;
  nlohmann::json masked_request(const TokenSeq& tokens) const;

  std::unique_ptr<httplib::Client> client_;
  mutable std::mutex mutex_;
  BackendInfo info_;
};

// Serves any MlmBackend over the protocol above. Used to expose the mock
// model to out-of-process clients and to test SidecarBackend.
class WireServer {
 public:
  explicit WireServer(const MlmBackend& backend);
  ~WireServer();
  WireServer(const WireServer&) = delete;
  WireServer& operator=(const WireServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host, int port = 0);
  // Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  void install_routes();

  const MlmBackend& backend_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace mwepara
