#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "facihub/error.hpp"
#include "facihub/targeting.hpp"

namespace facihub {

struct LlmConfig {
  std::string client = "deterministic";  // deterministic | http
  std::string endpoint;                  // OpenAI-compatible base URL
  std::string model = "kimi-k2-turbo-preview";
  double temperature = 0.6;
  std::string coder_model = "gpt-5.2";
  double coder_temperature = 0.7;
  int timeout_seconds = 60;
  int parallelism = 4;
  std::string api_key;  // normally from FACIHUB_LLM_KEY
};

struct StatsConfig {
  std::size_t permutation_n = 2000;
  std::uint64_t permutation_seed = 20250101;
  double alpha = 0.05;
  unsigned threads = 1;
  int balance_utc_offset_minutes = 0;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string api_token;  // empty: no token check
};

struct EngineConfig {
  LlmConfig llm;
  TargetingConfig targeting;
  StatsConfig stats;
  ServerConfig server;
  std::string framework = "refined";  // refined | full
  std::string prompts_dir;             // optional template overrides
  std::string coding_scheme;           // optional scheme JSON
  std::string data_dir = "data";

  void validate() const {
    std::vector<FieldError> errors;
    if (!(targeting.fraction > 0.0 && targeting.fraction <= 1.0))
      errors.push_back({"targeting.fraction", "must lie in (0, 1]"});
    if (targeting.window_hours <= 0) errors.push_back({"targeting.window_hours", "must be positive"});
    if (targeting.s < 1) errors.push_back({"targeting.s", "must be at least 1"});
    if (stats.permutation_n < 1) errors.push_back({"stats.permutation_n", "must be at least 1"});
    if (!(stats.alpha > 0.0 && stats.alpha < 1.0)) errors.push_back({"stats.alpha", "must lie in (0, 1)"});
    if (llm.client != "deterministic" && llm.client != "http")
      errors.push_back({"llm.client", "must be deterministic or http"});
    if (llm.client == "http" && llm.endpoint.empty()) errors.push_back({"llm.endpoint", "required for http client"});
    if (llm.timeout_seconds <= 0) errors.push_back({"llm.timeout_seconds", "must be positive"});
    if (llm.parallelism < 1) errors.push_back({"llm.parallelism", "must be at least 1"});
    if (framework != "refined" && framework != "full") errors.push_back({"framework", "must be refined or full"});
    if (data_dir.empty()) errors.push_back({"storage.data_dir", "required"});
    if (!errors.empty()) throw ValidationError("invalid configuration", std::move(errors));
  }
};

namespace detail {

template <class T>
void read_field(const nlohmann::json& obj, const char* key, T& out, const std::string& path,
                std::vector<FieldError>& errors) {
  if (!obj.contains(key) || obj[key].is_null()) return;
  try {
    out = obj[key].get<T>();
  } catch (const nlohmann::json::exception&) {
    errors.push_back({path + key, "wrong type"});
  }
}

}  // namespace detail

inline EngineConfig config_from_json(const nlohmann::json& j) {
  EngineConfig c;
  std::vector<FieldError> errors;
  if (!j.is_object()) throw ValidationError("configuration must be an object");
  auto section = [&](const char* name) -> nlohmann::json {
    if (!j.contains(name)) return nlohmann::json::object();
    if (!j[name].is_object()) {
      errors.push_back({name, "must be an object"});
      return nlohmann::json::object();
    }
    return j[name];
  };
  const auto llm = section("llm");
  detail::read_field(llm, "client", c.llm.client, "llm.", errors);
  detail::read_field(llm, "endpoint", c.llm.endpoint, "llm.", errors);
  detail::read_field(llm, "model", c.llm.model, "llm.", errors);
  detail::read_field(llm, "temperature", c.llm.temperature, "llm.", errors);
  detail::read_field(llm, "coder_model", c.llm.coder_model, "llm.", errors);
  detail::read_field(llm, "coder_temperature", c.llm.coder_temperature, "llm.", errors);
  detail::read_field(llm, "timeout_seconds", c.llm.timeout_seconds, "llm.", errors);
  detail::read_field(llm, "parallelism", c.llm.parallelism, "llm.", errors);

  const auto targeting = section("targeting");
  detail::read_field(targeting, "window_hours", c.targeting.window_hours, "targeting.", errors);
  detail::read_field(targeting, "fraction", c.targeting.fraction, "targeting.", errors);
  detail::read_field(targeting, "s", c.targeting.s, "targeting.", errors);
  detail::read_field(targeting, "pca_user_id", c.targeting.pca_user_id, "targeting.", errors);
  std::string parity = to_string(c.targeting.parity);
  detail::read_field(targeting, "parity_mapping", parity, "targeting.", errors);
  if (auto p = parse_parity_mapping(parity)) c.targeting.parity = *p;
  else errors.push_back({"targeting.parity_mapping", "must be odd_with_pca or odd_without_pca"});

  const auto stats = section("stats");
  detail::read_field(stats, "permutation_n", c.stats.permutation_n, "stats.", errors);
  detail::read_field(stats, "permutation_seed", c.stats.permutation_seed, "stats.", errors);
  detail::read_field(stats, "alpha", c.stats.alpha, "stats.", errors);
  detail::read_field(stats, "threads", c.stats.threads, "stats.", errors);
  detail::read_field(stats, "balance_utc_offset_minutes", c.stats.balance_utc_offset_minutes, "stats.", errors);

  const auto server = section("server");
  detail::read_field(server, "host", c.server.host, "server.", errors);
  detail::read_field(server, "port", c.server.port, "server.", errors);
  detail::read_field(server, "api_token", c.server.api_token, "server.", errors);

  const auto storage = section("storage");
  detail::read_field(storage, "data_dir", c.data_dir, "storage.", errors);

  const auto roles = section("roles");
  detail::read_field(roles, "framework", c.framework, "roles.", errors);
  detail::read_field(roles, "prompts_dir", c.prompts_dir, "roles.", errors);
  detail::read_field(roles, "coding_scheme", c.coding_scheme, "roles.", errors);

  if (!errors.empty()) throw ValidationError("invalid configuration", std::move(errors));
  return c;
}

inline nlohmann::json to_json(const EngineConfig& c) {
  return {{"llm",
           {{"client", c.llm.client},
            {"endpoint", c.llm.endpoint},
            {"model", c.llm.model},
            {"temperature", c.llm.temperature},
            {"coder_model", c.llm.coder_model},
            {"coder_temperature", c.llm.coder_temperature},
            {"timeout_seconds", c.llm.timeout_seconds},
            {"parallelism", c.llm.parallelism}}},
          {"targeting",
           {{"window_hours", c.targeting.window_hours},
            {"fraction", c.targeting.fraction},
            {"s", c.targeting.s},
            {"parity_mapping", to_string(c.targeting.parity)},
            {"pca_user_id", c.targeting.pca_user_id}}},
          {"stats",
           {{"permutation_n", c.stats.permutation_n},
            {"permutation_seed", c.stats.permutation_seed},
            {"alpha", c.stats.alpha},
            {"threads", c.stats.threads},
            {"balance_utc_offset_minutes", c.stats.balance_utc_offset_minutes}}},
          {"server", {{"host", c.server.host}, {"port", c.server.port}}},
          {"storage", {{"data_dir", c.data_dir}}},
          {"roles", {{"framework", c.framework}, {"prompts_dir", c.prompts_dir}, {"coding_scheme", c.coding_scheme}}}};
}

/// Loads `path`, or the file named by FACIHUB_CONFIG when `path` is empty, or
/// the defaults when neither is given. FACIHUB_LLM_KEY overrides the key.
inline EngineConfig load_config(const std::string& path = {}) {
  std::string file = path;
  if (file.empty())
    if (const char* env = std::getenv("FACIHUB_CONFIG")) file = env;
  EngineConfig c;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) fail(ErrorCode::config, "cannot open config file '" + file + "'");
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::config, "config file '" + file + "' is not valid JSON");
    c = config_from_json(j);
  }
  if (const char* key = std::getenv("FACIHUB_LLM_KEY")) c.llm.api_key = key;
  c.validate();
  return c;
}

}  // namespace facihub
