#include "exprforge/llm_client.hpp"

#include <httplib.h>

#include <cstdlib>
#include <nlohmann/json.hpp>

#include "exprforge/error.hpp"

namespace exprforge {

using json = nlohmann::json;

ChatCompletionClient::ChatCompletionClient(LlmConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) throw Error(ErrorCode::EndpointUnavailable, "LLM base URL is not configured");
}

std::string ChatCompletionClient::complete(const std::string& prompt) {
  httplib::Client client(config_.base_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const json body = {
      {"model", config_.model},
      {"temperature", 0},
      {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
  };
  auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::EndpointUnavailable, "LLM endpoint unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::EndpointUnavailable, "LLM endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    const json reply = json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedResponse, std::string("unexpected LLM response: ") + e.what());
  }
}

}  // namespace exprforge
