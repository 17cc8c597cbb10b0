#include <cstdlib>

#include <httplib.h>

#include "tvcp/llm.hpp"

namespace tvcp::llm {

using json = nlohmann::ordered_json;

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
  if (config_.api_key.empty())
    if (const char* key = std::getenv(kApiKeyEnv)) config_.api_key = key;
  const auto scheme = config_.endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint '" + config_.endpoint + "' lacks a scheme");
  const auto slash = config_.endpoint.find('/', scheme + 3);
  origin_ = config_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "" : config_.endpoint.substr(slash);
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  path_ += "/chat/completions";
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
  json body;
  body["model"] = config_.model;
  body["temperature"] = config_.temperature;
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["messages"] = msgs;

  httplib::Client cli(origin_);
  cli.set_connection_timeout(config_.timeout_seconds);
  cli.set_read_timeout(config_.timeout_seconds);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransientError("request to " + origin_ + " failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw TransientError("endpoint returned HTTP " + std::to_string(res->status));
  if (res->status != 200) throw Error("endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
  try {
    return json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(std::string("unexpected completion payload: ") + e.what());
  }
}

}  // namespace tvcp::llm
