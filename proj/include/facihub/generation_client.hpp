#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "facihub/error.hpp"

namespace facihub {

/// FNV-1a, used wherever a stable content hash is needed (stub replies,
/// derived ids). Not for security.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

struct GenerationRequest {
  std::string system_prompt;
  std::vector<std::string> user_messages;
  std::string model_name;
  double temperature = 0.6;
};

/// Single request/response text completion. Implementations throw
/// GenerationError (retryable) on transport failure.
class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  virtual std::string complete(const GenerationRequest& request) = 0;
  virtual std::string kind() const = 0;
};

/// Test double driven by a callback. Thread-safe; records every request.
class StubClient : public GenerationClient {
 public:
  using Responder = std::function<std::string(const GenerationRequest&, std::size_t call_index)>;

  explicit StubClient(Responder responder) : responder_(std::move(responder)) {}

  /// Returns the scripted outputs in order; the last one repeats.
  static StubClient scripted(std::vector<std::string> outputs) {
    return StubClient([outputs = std::move(outputs)](const GenerationRequest&, std::size_t i) {
      if (outputs.empty()) return std::string();
      return outputs[std::min(i, outputs.size() - 1)];
    });
  }

  std::string complete(const GenerationRequest& request) override {
    std::size_t index;
    {
      std::lock_guard lock(mutex_);
      index = requests_.size();
      requests_.push_back(request);
    }
    return responder_(request, index);
  }

  std::string kind() const override { return "stub"; }

  std::vector<GenerationRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  Responder responder_;
  mutable std::mutex mutex_;
  std::vector<GenerationRequest> requests_;
};

}  // namespace facihub
