#include "mwepara/sidecar.hpp"

#include <httplib.h>

#include <charconv>

#include "mwepara/error.hpp"

namespace mwepara {

using nlohmann::json;

namespace {

ErrorCode code_from_name(std::string_view name) {
  for (auto code : {ErrorCode::kInvalidInput, ErrorCode::kDimensionMismatch,
                    ErrorCode::kDegenerateInput, ErrorCode::kEmptyResult}) {
    if (error_code_name(code) == name) return code;
  }
  return ErrorCode::kBackendError;
}

TokenSeq ids_only(const json& ids) {
  TokenSeq seq;
  for (const auto& id : ids) seq.push_back(id.get<TokenId>(), "", false);
  return seq;
}

}  // namespace

SidecarAddress parse_sidecar_address(std::string_view address) {
  SidecarAddress out;
  std::string_view port_part = address;
  if (const auto colon = address.rfind(':'); colon != std::string_view::npos) {
    out.host = std::string(address.substr(0, colon));
    port_part = address.substr(colon + 1);
  }
  int port = 0;
  const auto [ptr, ec] = std::from_chars(port_part.data(), port_part.data() + port_part.size(), port);
  if (ec != std::errc() || ptr != port_part.data() + port_part.size() || port <= 0 ||
      port > 65535 || out.host.empty()) {
    throw Error(ErrorCode::kInvalidInput, "bad sidecar address '" + std::string(address) + "'");
  }
  out.port = port;
  return out;
}

// ---------------------------------------------------------------------------
// Client

SidecarBackend::SidecarBackend(const SidecarAddress& address, int timeout_seconds)
    : client_(std::make_unique<httplib::Client>(address.host, address.port)) {
  client_->set_connection_timeout(timeout_seconds, 0);
  client_->set_read_timeout(timeout_seconds, 0);
  client_->set_write_timeout(timeout_seconds, 0);
  client_->set_keep_alive(true);

  const auto j = call("/info", nullptr);
  try {
    info_.checkpoint = j.at("checkpoint").get<std::string>();
    info_.hidden_size = j.at("hidden_size").get<std::size_t>();
    info_.vocab_size = j.at("vocab_size").get<std::size_t>();
    info_.max_length = j.at("max_length").get<std::size_t>();
    info_.mask_id = j.at("mask_id").get<TokenId>();
    info_.mask_token = j.value("mask_token", std::string("[MASK]"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBackendError, std::string("malformed /info response: ") + e.what());
  }
}

SidecarBackend::~SidecarBackend() = default;

json SidecarBackend::call(const std::string& path, const json* body) const {
  std::lock_guard lock(mutex_);
  const auto res = body ? client_->Post(path, body->dump(), "application/json")
                        : client_->Get(path);
  if (!res) {
    throw Error(ErrorCode::kBackendError,
                "sidecar request " + path + " failed: " + httplib::to_string(res.error()));
  }
  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBackendError, "sidecar " + path + " returned invalid JSON (status " +
                                              std::to_string(res->status) + "): " + e.what());
  }
  if (res->status != 200) {
    const auto err = reply.value("error", json::object());
    throw Error(code_from_name(err.value("code", std::string("BackendError"))),
                "sidecar " + path + " (status " + std::to_string(res->status) +
                    "): " + err.value("message", std::string("unknown error")));
  }
  return reply;
}

json SidecarBackend::masked_request(const TokenSeq& tokens) const {
  return json{{"ids", tokens.ids}, {"mask_positions", find_mask_positions(tokens, info_.mask_id)}};
}

TokenSeq SidecarBackend::tokenize(std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::kInvalidInput, "cannot tokenize empty text");
  const json body{{"text", text}};
  const auto j = call("/tokenize", &body);
  TokenSeq seq;
  try {
    seq.ids = j.at("ids").get<std::vector<TokenId>>();
    seq.surfaces = j.at("surfaces").get<std::vector<std::string>>();
    seq.is_subword = j.at("is_subword").get<std::vector<bool>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBackendError, std::string("malformed /tokenize response: ") + e.what());
  }
  if (!seq.consistent()) {
    throw Error(ErrorCode::kBackendError, "/tokenize returned lists of different lengths");
  }
  return seq;
}

std::vector<MaskEmbedding> SidecarBackend::mask_hidden_states(const TokenSeq& tokens) const {
  const auto body = masked_request(tokens);
  if (body.at("mask_positions").empty()) {
    throw Error(ErrorCode::kInvalidInput, "no mask placeholder in input");
  }
  const auto j = call("/hidden_states", &body);
  std::vector<MaskEmbedding> out;
  for (const auto& v : j.at("vectors")) {
    MaskEmbedding e{v.get<std::vector<float>>()};
    if (e.size() != info_.hidden_size) {
      throw Error(ErrorCode::kBackendError, "/hidden_states returned a vector of size " +
                                                std::to_string(e.size()));
    }
    out.push_back(std::move(e));
  }
  if (out.size() != body.at("mask_positions").size()) {
    throw Error(ErrorCode::kBackendError, "/hidden_states returned the wrong number of vectors");
  }
  return out;
}

TopKDistribution SidecarBackend::apply_output_head(std::span<const double> vector,
                                                   std::size_t k) const {
  if (vector.size() != info_.hidden_size) {
    throw Error(ErrorCode::kDimensionMismatch,
                "vector has " + std::to_string(vector.size()) + " components, expected " +
                    std::to_string(info_.hidden_size));
  }
  const json body{{"vector", std::vector<double>(vector.begin(), vector.end())}, {"k", k}};
  const auto j = call("/output_head", &body);
  TopKDistribution out;
  out.total_probability = j.at("total_prob").get<double>();
  for (const auto& e : j.at("entries")) {
    out.entries.push_back(TopKEntry{e.at("id").get<TokenId>(), e.at("surface").get<std::string>(),
                                    e.at("prob").get<double>(), e.value("is_subword", false),
                                    e.value("is_special", false)});
  }
  return out;
}

std::vector<double> SidecarBackend::token_log_probs(const TokenSeq& tokens,
                                                    std::span<const std::size_t> mask_positions,
                                                    std::span<const TokenId> targets) const {
  const json body{{"ids", tokens.ids},
                  {"mask_positions", std::vector<std::size_t>(mask_positions.begin(), mask_positions.end())},
                  {"targets", std::vector<TokenId>(targets.begin(), targets.end())}};
  const auto j = call("/log_probs", &body);
  auto out = j.at("log_probs").get<std::vector<double>>();
  if (out.size() != targets.size()) {
    throw Error(ErrorCode::kBackendError, "/log_probs returned the wrong number of values");
  }
  return out;
}

AttentionProfile SidecarBackend::attention_to_masks(const TokenSeq& tokens) const {
  const auto body = masked_request(tokens);
  const auto j = call("/attention", &body);
  AttentionProfile out{j.at("weights").get<std::vector<double>>()};
  if (out.weights.size() != tokens.size()) {
    throw Error(ErrorCode::kBackendError, "/attention returned the wrong number of weights");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Server

WireServer::WireServer(const MlmBackend& backend)
    : backend_(backend), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

WireServer::~WireServer() { stop(); }

void WireServer::install_routes() {
  auto reply_error = [](httplib::Response& res, int status, std::string_view code,
                        const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(),
                    "application/json");
  };

  // Wraps a handler body with JSON parsing and error mapping.
  auto route = [this, reply_error](auto handler) {
    return [this, handler, reply_error](const httplib::Request& req, httplib::Response& res) {
      try {
        const json body = req.body.empty() ? json::object() : json::parse(req.body);
        if (body.contains("ids") && body.at("ids").size() > backend_.info().max_length) {
          reply_error(res, 413, error_code_name(ErrorCode::kInvalidInput),
                      "input exceeds max_length");
          return;
        }
        res.set_content(handler(body).dump(), "application/json");
      } catch (const Error& e) {
        const bool client_fault = e.code() == ErrorCode::kInvalidInput ||
                                  e.code() == ErrorCode::kDimensionMismatch;
        reply_error(res, client_fault ? 400 : 500, error_code_name(e.code()), e.message());
      } catch (const json::exception& e) {
        reply_error(res, 400, error_code_name(ErrorCode::kInvalidInput), e.what());
      } catch (const std::exception& e) {
        reply_error(res, 500, error_code_name(ErrorCode::kBackendError), e.what());
      }
    };
  };

  auto check_masks = [this](const TokenSeq& seq, const json& body) {
    const auto declared = body.at("mask_positions").get<std::vector<std::size_t>>();
    if (declared != find_mask_positions(seq, backend_.info().mask_id)) {
      throw Error(ErrorCode::kInvalidInput, "mask_positions do not match mask ids");
    }
  };

  server_->Get("/info", route([this](const json&) {
    const auto& info = backend_.info();
    return json{{"checkpoint", info.checkpoint}, {"hidden_size", info.hidden_size},
                {"vocab_size", info.vocab_size}, {"max_length", info.max_length},
                {"mask_id", info.mask_id},       {"mask_token", info.mask_token}};
  }));
  server_->Post("/tokenize", route([this](const json& body) {
    const auto seq = backend_.tokenize(body.at("text").get<std::string>());
    return json{{"ids", seq.ids}, {"surfaces", seq.surfaces}, {"is_subword", seq.is_subword}};
  }));
  server_->Post("/hidden_states", route([this, check_masks](const json& body) {
    const auto seq = ids_only(body.at("ids"));
    check_masks(seq, body);
    json vectors = json::array();
    for (const auto& e : backend_.mask_hidden_states(seq)) vectors.push_back(e.values);
    return json{{"vectors", vectors}};
  }));
  server_->Post("/output_head", route([this](const json& body) {
    const auto v = body.at("vector").get<std::vector<double>>();
    const auto dist = backend_.apply_output_head(v, body.value("k", std::size_t{50}));
    json entries = json::array();
    for (const auto& e : dist.entries) {
      entries.push_back({{"id", e.id}, {"surface", e.surface}, {"prob", e.probability},
                         {"is_subword", e.is_subword}, {"is_special", e.is_special}});
    }
    return json{{"entries", entries}, {"total_prob", dist.total_probability}};
  }));
  server_->Post("/log_probs", route([this](const json& body) {
    const auto seq = ids_only(body.at("ids"));
    const auto positions = body.at("mask_positions").get<std::vector<std::size_t>>();
    const auto targets = body.at("targets").get<std::vector<TokenId>>();
    return json{{"log_probs", backend_.token_log_probs(seq, positions, targets)}};
  }));
  server_->Post("/attention", route([this, check_masks](const json& body) {
    const auto seq = ids_only(body.at("ids"));
    check_masks(seq, body);
    return json{{"weights", backend_.attention_to_masks(seq).weights}};
  }));
}

int WireServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) {
    throw Error(ErrorCode::kIoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void WireServer::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) {
    throw Error(ErrorCode::kIoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void WireServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace mwepara
