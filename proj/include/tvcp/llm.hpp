#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tvcp/dataset.hpp"
#include "tvcp/error.hpp"
#include "tvcp/evaluation.hpp"

namespace tvcp::llm {

struct ChatMessage {
  std::string role;  // system | user | assistant
  std::string content;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct FewShotExample {
  std::string target;
  std::string followup;
  TvcpLabel label;
  std::string explanation;
};

const std::string& system_prompt();
// Increased, Decreased, Neutral — the order they are shown to the model.
const std::vector<FewShotExample>& few_shot_examples();

std::string_view class_word(TvcpLabel l) noexcept;  // Decreased | Neutral | Increased
std::string format_query(std::string_view target, std::string_view followup);
std::string format_assistant(std::string_view explanation, TvcpLabel label);

struct PromptOptions {
  bool duration_scale_hint = false;  // appends the duration scale to the system message
};

// [system, (user, assistant) x 3, query]
std::vector<ChatMessage> build_prompt(std::string_view target, std::string_view followup,
                                      const PromptOptions& options = {});
std::vector<ChatMessage> build_prompt(const Sample& s, const PromptOptions& options = {});
std::string prompt_hash(const std::vector<ChatMessage>& messages);

enum class ParseStatus { kOk, kMissingClass, kMalformed };
std::string_view to_string(ParseStatus s) noexcept;

struct ParsedPrediction {
  std::string sample_id;
  std::string raw;
  std::optional<std::string> explanation;
  std::optional<TvcpLabel> label;
  ParseStatus status = ParseStatus::kMissingClass;
};

// The first ``` block is the explanation; the last class word outside it is the answer.
ParsedPrediction parse_response(std::string_view raw, std::string sample_id = {});

// --- client -----------------------------------------------------------------

// Retryable failure (timeouts, rate limits, 5xx).
class TransientError : public Error {
 public:
  using Error::Error;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

struct HttpClientConfig {
  std::string endpoint = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo";
  std::string api_key;
  double temperature = 0.0;
  int timeout_seconds = 60;
};

inline constexpr const char* kApiKeyEnv = "TVCP_LLM_API_KEY";

// Chat-completions over HTTP(S). The key is read from the environment when empty.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config);
  std::string complete(const std::vector<ChatMessage>& messages) override;

 private:
  HttpClientConfig config_;
  std::string origin_;
  std::string path_;
};

// --- evaluation run ---------------------------------------------------------

struct EvalRunConfig {
  std::filesystem::path cache_dir;
  unsigned concurrency = 4;
  int max_retries = 3;
  std::chrono::milliseconds base_backoff{500};
  PromptOptions prompt;
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

struct SampleRecord {
  ParsedPrediction parsed;
  bool from_cache = false;
  int attempts = 0;
  std::optional<std::string> failure;  // retries exhausted or permanent client error
};

struct EvalRunResult {
  std::vector<Prediction> predictions;  // unparsed and failed samples carry no label
  std::vector<SampleRecord> records;
  std::size_t client_calls = 0;
  std::size_t cache_hits = 0;
  std::size_t unparsed = 0;
  std::size_t failures = 0;
  EvalReport report;
};

EvalRunResult run_llm_eval(const std::vector<Sample>& samples, ChatClient& client, const EvalRunConfig& config);

nlohmann::ordered_json to_json(const SampleRecord& r);

}  // namespace tvcp::llm
