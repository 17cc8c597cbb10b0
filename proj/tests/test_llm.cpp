#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "tvcp/llm.hpp"
#include "tvcp/util.hpp"

using namespace tvcp;
using namespace tvcp::llm;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

// Replies with the gold class word for every third sample, a wrong class
// otherwise, and occasionally with no class at all.
class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::map<std::string, std::string> replies) : replies_(std::move(replies)) {}

  std::string complete(const std::vector<ChatMessage>& messages) override {
    const int now = ++in_flight_;
    {
      std::lock_guard lock(mu_);
      max_in_flight_ = std::max(max_in_flight_, now);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    ++calls_;
    --in_flight_;
    const auto& q = messages.back().content;
    {
      std::lock_guard lock(mu_);
      if (failures_left_[q] > 0) {
        --failures_left_[q];
        throw TransientError("rate limited");
      }
      if (permanent_.count(q)) throw Error("bad request");
    }
    auto it = replies_.find(q);
    return it == replies_.end() ? "```no idea```" : it->second;
  }

  void fail_transiently(const std::string& query, int times) { failures_left_[query] = times; }
  void fail_permanently(const std::string& query) { permanent_.insert(query); }
  int calls() const { return calls_; }
  int max_in_flight() const { return max_in_flight_; }

 private:
  std::map<std::string, std::string> replies_;
  std::map<std::string, int> failures_left_;
  std::set<std::string> permanent_;
  std::atomic<int> calls_{0}, in_flight_{0};
  int max_in_flight_ = 0;
  std::mutex mu_;
};

struct Fixture {
  std::vector<Sample> samples;
  std::map<std::string, std::string> replies;
};

// 20 samples with hand-built responses: some right, some wrong, some unparseable.
Fixture fixture20() {
  Fixture f;
  auto all = synth_generate(7, 13);
  all.resize(20);
  f.samples = all;
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& s = all[i];
    const auto q = format_query(s.target_text, s.followup_text);
    std::string reply;
    if (i % 7 == 6) {
      reply = "I cannot determine this.";
    } else {
      const auto label = i % 4 == 3 ? TvcpLabel((index_of(s.label) + 1) % 3) : s.label;
      // mention a different class inside the explanation to exercise last-outside-block extraction
      reply = "```It is not " + std::string(class_word(TvcpLabel((index_of(label) + 2) % 3))) + ".```\n" +
              std::string(class_word(label));
    }
    f.replies[q] = reply;
  }
  return f;
}

EvalRunConfig quick(const fs::path& cache) {
  EvalRunConfig c;
  c.cache_dir = cache;
  c.concurrency = 3;
  c.base_backoff = std::chrono::milliseconds(1);
  c.sleep = [](std::chrono::milliseconds) {};
  return c;
}

}  // namespace

TEST(Prompt, ShapeAndVerbatimPieces) {
  const auto m = build_prompt("Heading out for lunch", "The diner is closed today");
  ASSERT_EQ(m.size(), 8u);
  EXPECT_EQ(m[0].role, "system");
  EXPECT_NE(m[0].content.find("Surround this explanation in triple backticks"), std::string::npos);
  EXPECT_EQ(m[0].content.rfind("You are a language model specializing in temporal commonsense reasoning", 0), 0u);
  for (int i = 1; i < 7; ++i) EXPECT_EQ(m[i].role, i % 2 ? "user" : "assistant");
  EXPECT_EQ(m[7].role, "user");
  EXPECT_EQ(m[7].content, "Sentence A: Heading out for lunch\nSentence B: The diner is closed today");
  EXPECT_EQ(m, build_prompt("Heading out for lunch", "The diner is closed today"));
  EXPECT_EQ(prompt_hash(m), prompt_hash(build_prompt("Heading out for lunch", "The diner is closed today")));
  EXPECT_NE(prompt_hash(m), prompt_hash(build_prompt("Heading out for dinner", "The diner is closed today")));
  EXPECT_THROW(build_prompt(" ", "x"), ContractError);
}

TEST(Prompt, OneFewShotPerClassEndingInClassWord) {
  const auto& ex = few_shot_examples();
  ASSERT_EQ(ex.size(), 3u);
  std::set<TvcpLabel> seen;
  const auto m = build_prompt("a b", "c d");
  for (std::size_t i = 0; i < 3; ++i) {
    seen.insert(ex[i].label);
    const auto& a = m[2 + 2 * i].content;
    const auto word = std::string(class_word(ex[i].label));
    EXPECT_EQ(a.substr(a.size() - word.size()), word);
    EXPECT_EQ(m[1 + 2 * i].content, format_query(ex[i].target, ex[i].followup));
  }
  EXPECT_EQ(seen.size(), 3u);
  EXPECT_EQ(ex[0].target, "I'm ready to go to the beach");
  EXPECT_EQ(ex[0].label, TvcpLabel::kInc);
  EXPECT_EQ(ex[1].label, TvcpLabel::kDec);
  EXPECT_EQ(ex[2].followup, "Instagram DMs are such a fun way to communicate.");
}

TEST(Prompt, DurationHintIsOptIn) {
  const auto plain = build_prompt("a b", "c d");
  const auto hinted = build_prompt("a b", "c d", {.duration_scale_hint = true});
  EXPECT_EQ(plain[0].content, system_prompt());
  EXPECT_NE(hinted[0].content, plain[0].content);
  EXPECT_NE(hinted[0].content.find("more than 6 hours"), std::string::npos);
}

TEST(Parse, Examples) {
  auto p = parse_response("```The event was postponed...``` Increased");
  EXPECT_EQ(p.status, ParseStatus::kOk);
  EXPECT_EQ(p.label, TvcpLabel::kInc);
  EXPECT_EQ(p.explanation, "The event was postponed...");

  p = parse_response("neutral");
  EXPECT_EQ(p.status, ParseStatus::kOk);
  EXPECT_EQ(p.label, TvcpLabel::kUnc);
  EXPECT_FALSE(p.explanation);

  p = parse_response("I cannot determine this.");
  EXPECT_EQ(p.status, ParseStatus::kMissingClass);
  EXPECT_FALSE(p.label);
}

TEST(Parse, LastClassOutsideBlockWins) {
  auto p = parse_response("Maybe Decreased? ```it could be Increased``` Final answer: NEUTRAL.");
  EXPECT_EQ(p.label, TvcpLabel::kUnc);
  p = parse_response("```Neutral and Increased both fit```");
  EXPECT_EQ(p.status, ParseStatus::kMissingClass);
  p = parse_response("Increasedly odd");  // not a whole word
  EXPECT_EQ(p.status, ParseStatus::kMissingClass);
  EXPECT_EQ(parse_response("``` open block Increased").status, ParseStatus::kMalformed);
  EXPECT_EQ(parse_response("   ").status, ParseStatus::kMalformed);
  EXPECT_EQ(parse_response("```a``` Decreased ```b``` Increased").label, TvcpLabel::kInc);
}

TEST(Parse, FewShotAssistantTextRecoversOwnClass) {
  for (const auto& ex : few_shot_examples()) {
    const auto p = parse_response(format_assistant(ex.explanation, ex.label));
    EXPECT_EQ(p.status, ParseStatus::kOk);
    EXPECT_EQ(p.label, ex.label);
    EXPECT_EQ(p.explanation, ex.explanation);
  }
}

TEST(Run, DeterministicReportAndCacheRerun) {
  const auto f = fixture20();
  const auto cache = temp_dir("tvcp_llm_cache");
  ScriptedClient client(f.replies);
  const auto first = run_llm_eval(f.samples, client, quick(cache));
  EXPECT_EQ(client.calls(), 20);
  EXPECT_EQ(first.client_calls, 20u);
  EXPECT_LE(client.max_in_flight(), 3);

  // expected counts from the fixture construction
  std::size_t correct = 0, unparsed = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    if (i % 7 == 6) ++unparsed;
    else if (i % 4 != 3) ++correct;
  }
  EXPECT_EQ(first.unparsed, unparsed);
  EXPECT_EQ(first.failures, 0u);
  EXPECT_DOUBLE_EQ(first.report.accuracy, static_cast<double>(correct) / 20.0);
  EXPECT_EQ(first.report.n_samples, 20u);
  EXPECT_EQ(first.report.n_unparsed, unparsed);

  ScriptedClient second_client(f.replies);
  const auto second = run_llm_eval(f.samples, second_client, quick(cache));
  EXPECT_EQ(second_client.calls(), 0);
  EXPECT_EQ(second.cache_hits, 20u);
  EXPECT_EQ(to_json(second.report), to_json(first.report));
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(second.records[i].parsed.raw, first.records[i].parsed.raw);
    EXPECT_EQ(second.records[i].parsed.label, first.records[i].parsed.label);
    EXPECT_EQ(second.records[i].parsed.explanation, first.records[i].parsed.explanation);
  }

  // cache entries carry the documented fields
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(cache)) {
    const auto j = nlohmann::json::parse(read_file(e.path()));
    for (const char* k : {"sample_id", "prompt_hash", "raw_response", "timestamp"}) EXPECT_TRUE(j.contains(k));
    ++files;
  }
  EXPECT_EQ(files, 20u);

  // a different prompt configuration misses the cache
  ScriptedClient third(f.replies);
  auto cfg = quick(cache);
  cfg.prompt.duration_scale_hint = true;
  run_llm_eval(f.samples, third, cfg);
  EXPECT_EQ(third.calls(), 20);
  fs::remove_all(cache);
}

TEST(Run, SingleTransientFailureRetriedOnce) {
  auto f = fixture20();
  f.samples.resize(2);
  ScriptedClient client(f.replies);
  const auto q0 = format_query(f.samples[0].target_text, f.samples[0].followup_text);
  client.fail_transiently(q0, 1);
  std::vector<std::chrono::milliseconds> sleeps;
  auto cfg = quick({});
  cfg.concurrency = 1;
  cfg.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };
  const auto r = run_llm_eval(f.samples, client, cfg);
  EXPECT_EQ(r.records[0].attempts, 2);
  EXPECT_EQ(r.records[0].parsed.status, ParseStatus::kOk);
  EXPECT_FALSE(r.records[0].failure);
  EXPECT_EQ(r.records[1].attempts, 1);
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(1)}));
  EXPECT_EQ(r.client_calls, 3u);
}

TEST(Run, ExhaustedRetriesRecordFailureAndContinue) {
  auto f = fixture20();
  f.samples.resize(3);
  ScriptedClient client(f.replies);
  client.fail_transiently(format_query(f.samples[0].target_text, f.samples[0].followup_text), 100);
  client.fail_permanently(format_query(f.samples[1].target_text, f.samples[1].followup_text));
  std::vector<std::chrono::milliseconds> sleeps;
  auto cfg = quick({});
  cfg.concurrency = 1;
  cfg.base_backoff = std::chrono::milliseconds(10);
  cfg.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d); };
  const auto r = run_llm_eval(f.samples, client, cfg);
  EXPECT_EQ(r.records[0].attempts, 4);  // first try + 3 retries
  EXPECT_TRUE(r.records[0].failure);
  EXPECT_EQ(r.records[1].attempts, 1);  // non-transient errors are not retried
  EXPECT_TRUE(r.records[1].failure);
  EXPECT_EQ(r.records[2].parsed.status, ParseStatus::kOk);
  EXPECT_EQ(r.failures, 2u);
  EXPECT_FALSE(r.predictions[0].predicted);
  using ms = std::chrono::milliseconds;
  EXPECT_EQ(sleeps, (std::vector<ms>{ms(10), ms(20), ms(40)}));
}

TEST(Run, MissingClassScoredIncorrect) {
  auto f = fixture20();
  f.samples.resize(1);
  const auto q = format_query(f.samples[0].target_text, f.samples[0].followup_text);
  ScriptedClient client({{q, "```thinking``` no clue"}});
  const auto r = run_llm_eval(f.samples, client, quick({}));
  EXPECT_EQ(r.unparsed, 1u);
  EXPECT_DOUBLE_EQ(r.report.accuracy, 0.0);
  EXPECT_EQ(r.report.n_samples, 1u);
}

TEST(HttpClient, TalksChatCompletions) {
  httplib::Server srv;
  std::atomic<int> hits{0};
  nlohmann::json last_body;
  std::mutex mu;
  srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++hits;
    {
      std::lock_guard lock(mu);
      last_body = nlohmann::json::parse(req.body);
    }
    if (req.get_header_value("Authorization") != "Bearer k123") {
      res.status = 401;
      return;
    }
    if (n == 2) {
      res.status = 429;
      return;
    }
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"```x``` Neutral"}}]})",
                    "application/json");
  });
  const int port = srv.bind_to_any_port("127.0.0.1");
  std::thread th([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  HttpChatClient client({.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1",
                         .model = "test-model",
                         .api_key = "k123"});
  const auto msgs = build_prompt("a b", "c d");
  EXPECT_EQ(client.complete(msgs), "```x``` Neutral");
  {
    std::lock_guard lock(mu);
    EXPECT_EQ(last_body["model"], "test-model");
    EXPECT_EQ(last_body["temperature"], 0.0);
    EXPECT_EQ(last_body["messages"].size(), 8u);
    EXPECT_EQ(last_body["messages"][0]["role"], "system");
  }
  EXPECT_THROW(client.complete(msgs), TransientError);

  HttpChatClient bad({.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1", .api_key = "wrong"});
  try {
    bad.complete(msgs);
    FAIL();
  } catch (const TransientError&) {
    FAIL() << "401 must not be retryable";
  } catch (const Error&) {
  }
  srv.stop();
  th.join();

  HttpChatClient down({.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1", .api_key = "k",
                       .timeout_seconds = 2});
  EXPECT_THROW(down.complete(msgs), TransientError);
}
