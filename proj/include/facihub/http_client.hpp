#pragma once

// OpenAI-compatible chat-completions client. Include after defining
// CPPHTTPLIB_OPENSSL_SUPPORT to reach https endpoints.

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "facihub/error.hpp"
#include "facihub/generation_client.hpp"

namespace facihub {

struct HttpEndpoint {
  std::string scheme_host_port;  // e.g. https://api.example.com:443
  std::string base_path;         // e.g. /v1
};

inline HttpEndpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorCode::config, "endpoint '" + url + "' lacks a scheme");
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") fail(ErrorCode::config, "unsupported endpoint scheme '" + scheme + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  HttpEndpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  e.base_path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!e.base_path.empty() && e.base_path.back() == '/') e.base_path.pop_back();
  return e;
}

/// System prompt plus each user message as a separate user turn.
inline nlohmann::json chat_completion_body(const GenerationRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"}, {"content", request.system_prompt}});
  for (const auto& m : request.user_messages) messages.push_back({{"role", "user"}, {"content", m}});
  return {{"model", request.model_name}, {"temperature", request.temperature}, {"messages", messages}};
}

/// Extracts choices[0].message.content; throws GenerationError otherwise.
inline std::string chat_completion_text(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw GenerationError("completion response is not JSON", false);
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw GenerationError("completion response has no choices[0].message.content", false);
  }
}

class HttpGenerationClient : public GenerationClient {
 public:
  HttpGenerationClient(std::string endpoint, std::string api_key, int timeout_seconds)
      : endpoint_(split_endpoint(endpoint)), api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (endpoint_.scheme_host_port.rfind("https", 0) == 0)
      fail(ErrorCode::config, "this build has no TLS support; use an http endpoint");
#endif
  }

  std::string complete(const GenerationRequest& request) override {
    // One client per call keeps the object safe to share across workers.
    httplib::Client client(endpoint_.scheme_host_port);
    client.set_connection_timeout(timeout_seconds_, 0);
    client.set_read_timeout(timeout_seconds_, 0);
    client.set_write_timeout(timeout_seconds_, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const auto res = client.Post(endpoint_.base_path + "/chat/completions", headers,
                                 chat_completion_body(request).dump(), "application/json");
    if (!res) throw GenerationError("transport failure: " + httplib::to_string(res.error()), true);
    if (res->status == 429 || res->status >= 500)
      throw GenerationError("endpoint returned HTTP " + std::to_string(res->status), true);
    if (res->status != 200) throw GenerationError("endpoint returned HTTP " + std::to_string(res->status), false);
    return chat_completion_text(res->body);
  }

  std::string kind() const override { return "http"; }

 private:
  HttpEndpoint endpoint_;
  std::string api_key_;
  int timeout_seconds_;
};

}  // namespace facihub
