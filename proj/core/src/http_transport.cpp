#ifdef METASYNTH_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <cstdlib>

#include "metasynth/llm_gateway.hpp"

namespace metasynth::llm {
namespace {

using nlohmann::json;

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base_path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto path_start = url.find('/', host_start);
  Endpoint e;
  if (path_start == std::string::npos) {
    e.origin = url;
  } else {
    e.origin = url.substr(0, path_start);
    e.base_path = url.substr(path_start);
  }
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  return e;
}

const char* role_name(Role r) { return r == Role::user ? "user" : "assistant"; }

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(const ProviderConfig& config) : config_(config), endpoint_(split_endpoint(config.endpoint)) {
    if (!config.credentials_env_var.empty()) {
      if (const char* key = std::getenv(config.credentials_env_var.c_str())) api_key_ = key;
    }
  }

  ChatResponse send(const ChatRequest& request) override {
    json body{{"model", config_.model},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens},
              {"stop", request.stop_sequences}};
    if (request.system) body["system"] = *request.system;
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    body["messages"] = std::move(messages);

    const auto reply = post("/chat", body);
    ChatResponse r;
    try {
      r.content = reply.at("content").get<std::string>();
      const auto finish = reply.value("finish_reason", std::string{"stop"});
      r.finish_reason = finish == "length" ? FinishReason::length
                        : finish == "error" ? FinishReason::error
                                            : FinishReason::stop;
      if (reply.contains("usage")) {
        r.usage.input_tokens = reply["usage"].value("input_tokens", std::int64_t{0});
        r.usage.output_tokens = reply["usage"].value("output_tokens", std::int64_t{0});
      }
    } catch (const json::exception& e) {
      throw ProviderError(ProviderError::Kind::bad_response, std::string("malformed chat response: ") + e.what());
    }
    return r;
  }

  std::vector<Embedding> send_embed(const std::vector<std::string>& texts) override {
    const json body{{"model", config_.model}, {"input", texts}};
    const auto reply = post("/embed", body);
    try {
      return reply.at("embeddings").get<std::vector<Embedding>>();
    } catch (const json::exception& e) {
      throw ProviderError(ProviderError::Kind::bad_response, std::string("malformed embed response: ") + e.what());
    }
  }

 private:
  json post(const std::string& route, const json& body) {
    httplib::Client client(endpoint_.origin);
    const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    auto res = client.Post(endpoint_.base_path + route, headers, body.dump(), "application/json");
    if (!res) throw TransientError("transport error: " + httplib::to_string(res.error()));
    const int status = res->status;
    if (status == 401 || status == 403) {
      throw ProviderError(ProviderError::Kind::authentication, "authentication failed (HTTP " + std::to_string(status) + ")");
    }
    if (status == 408 || status == 429 || status >= 500) {
      throw TransientError("HTTP " + std::to_string(status));
    }
    if (status != 200) {
      throw ProviderError(ProviderError::Kind::bad_response, "HTTP " + std::to_string(status) + ": " + res->body);
    }
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw ProviderError(ProviderError::Kind::bad_response, std::string("response is not JSON: ") + e.what());
    }
  }

  ProviderConfig config_;
  Endpoint endpoint_;
  std::string api_key_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(const ProviderConfig& config) {
  return std::make_shared<HttpTransport>(config);
}

}  // namespace metasynth::llm
