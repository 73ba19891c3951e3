#pragma once

#include <chrono>
#include <string>

namespace exprforge {

// Minimal text-completion endpoint. Implementations throw
// Error(EndpointUnavailable) when the endpoint cannot be reached.
class TextCompletionClient {
 public:
  virtual ~TextCompletionClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

struct LlmConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::string model;
  std::string api_key_env = "EXPRFORGE_LLM_API_KEY";
  std::chrono::milliseconds timeout{30'000};
};

// OpenAI-compatible /v1/chat/completions client over plain HTTP.
class ChatCompletionClient final : public TextCompletionClient {
 public:
  explicit ChatCompletionClient(LlmConfig config);
  std::string complete(const std::string& prompt) override;

 private:
  LlmConfig config_;
};

}  // namespace exprforge
