#include "tvcp/llm.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <thread>

#include "tvcp/util.hpp"

namespace tvcp::llm {

using json = nlohmann::ordered_json;

const std::string& system_prompt() {
  static const std::string kPrompt =
      "You are a language model specializing in temporal commonsense reasoning. Each prompt contains Sentence A "
      "and Sentence B. You should determine whether Sentence B changes the expected temporal validity duration of "
      "Sentence A, i.e., the duration for which the information in Sentence A is expected to be relevant to a "
      "reader.\n\n"
      "To achieve this, in your responses, first, estimate for how long the average reader may expect Sentence A "
      "to be relevant on its own. Then, consider if the information introduced in Sentence B increases or "
      "decreases this duration. Surround this explanation in triple backticks (```).\n\n"
      "After your explanation, respond with one of the three possible classes corresponding to your explanation: "
      "Decreased, Neutral, or Increased.";
  return kPrompt;
}

const std::vector<FewShotExample>& few_shot_examples() {
  static const std::vector<FewShotExample> kExamples = {
      {"I'm ready to go to the beach",
       "I forgot all the beach towels are still in the dryer, but I'll be ready to go as soon as the dryer's done "
       "running.",
       TvcpLabel::kInc,
       "Going to the beach may take a few minutes to an hour, depending on the distance. However, if the author "
       "first needs to wait on the dryer to finish in order to retrieve their beach towels, this may take an "
       "additional 30-60 minutes."},
      {"taking bad thoughts out of my mind thru grinding my assignments",
       "I just have to get through a short math homework assignment and memorize a few spelling words so it "
       "shouldn't take long.",
       TvcpLabel::kDec,
       "Grinding through assignments may take several hours, depending on the number of assignments to complete. "
       "In Sentence B, the author states they only have a few short assignments remaining, so they may only take "
       "an hour or less to finish them."},
      {"Slide to my dm guys, come on", "Instagram DMs are such a fun way to communicate.", TvcpLabel::kUnc,
       "The author encourages people to direct message them, which may be relevant for several minutes to a few "
       "hours. Sentence B does not change the duration for which Sentence A is expected to be relevant."},
  };
  return kExamples;
}

std::string_view class_word(TvcpLabel l) noexcept {
  switch (l) {
    case TvcpLabel::kDec: return "Decreased";
    case TvcpLabel::kUnc: return "Neutral";
    case TvcpLabel::kInc: return "Increased";
  }
  return "";
}

std::string format_query(std::string_view target, std::string_view followup) {
  return "Sentence A: " + std::string(target) + "\nSentence B: " + std::string(followup);
}

std::string format_assistant(std::string_view explanation, TvcpLabel label) {
  return "```" + std::string(explanation) + "```\n" + std::string(class_word(label));
}

std::vector<ChatMessage> build_prompt(std::string_view target, std::string_view followup,
                                      const PromptOptions& options) {
  if (is_blank(target) || is_blank(followup)) throw ContractError("prompt texts must be non-empty");
  std::string system = system_prompt();
  if (options.duration_scale_hint) {
    system += "\n\nDurations can be described on this scale:";
    for (auto c : kAllDurationClasses) system += "\n- " + std::string(display_name(c));
  }
  std::vector<ChatMessage> out{{"system", std::move(system)}};
  for (const auto& ex : few_shot_examples()) {
    out.push_back({"user", format_query(ex.target, ex.followup)});
    out.push_back({"assistant", format_assistant(ex.explanation, ex.label)});
  }
  out.push_back({"user", format_query(target, followup)});
  return out;
}

std::vector<ChatMessage> build_prompt(const Sample& s, const PromptOptions& options) {
  return build_prompt(s.target_text, s.followup_text, options);
}

std::string prompt_hash(const std::vector<ChatMessage>& messages) {
  std::string buf;
  for (const auto& m : messages) {
    buf += m.role;
    buf.push_back('\0');
    buf += m.content;
    buf.push_back('\0');
  }
  return hex64(fnv1a64(buf));
}

std::string_view to_string(ParseStatus s) noexcept {
  switch (s) {
    case ParseStatus::kOk: return "ok";
    case ParseStatus::kMissingClass: return "missing_class";
    case ParseStatus::kMalformed: return "malformed";
  }
  return "?";
}

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

// Position and label of the last class word in `text`, matched case-insensitively on word boundaries.
std::optional<std::pair<std::size_t, TvcpLabel>> last_class_word(std::string_view text) {
  const std::string lower = to_lower(text);
  std::optional<std::pair<std::size_t, TvcpLabel>> best;
  for (auto label : kAllTvcpLabels) {
    const std::string word = to_lower(class_word(label));
    for (std::size_t pos = lower.find(word); pos != std::string::npos; pos = lower.find(word, pos + 1)) {
      const bool left = pos == 0 || !is_word_char(lower[pos - 1]);
      const std::size_t end = pos + word.size();
      const bool right = end == lower.size() || !is_word_char(lower[end]);
      if (left && right && (!best || pos > best->first)) best = {{pos, label}};
    }
  }
  return best;
}

}  // namespace

ParsedPrediction parse_response(std::string_view raw, std::string sample_id) {
  ParsedPrediction p;
  p.sample_id = std::move(sample_id);
  p.raw = std::string(raw);
  if (is_blank(raw)) {
    p.status = ParseStatus::kMalformed;
    return p;
  }
  std::string outside;
  const auto open = raw.find("```");
  if (open == std::string_view::npos) {
    outside = std::string(raw);
  } else {
    const auto close = raw.find("```", open + 3);
    if (close == std::string_view::npos) {
      p.status = ParseStatus::kMalformed;
      return p;
    }
    p.explanation = trim(raw.substr(open + 3, close - open - 3));
    outside = std::string(raw.substr(0, open)) + "\n" + std::string(raw.substr(close + 3));
  }
  if (auto hit = last_class_word(outside)) {
    p.label = hit->second;
    p.status = ParseStatus::kOk;
  } else {
    p.status = ParseStatus::kMissingClass;
  }
  return p;
}

// --- evaluation run ---------------------------------------------------------

json to_json(const SampleRecord& r) {
  json j;
  j["sample_id"] = r.parsed.sample_id;
  j["status"] = std::string(to_string(r.parsed.status));
  j["label"] = r.parsed.label ? json(std::string(to_string(*r.parsed.label))) : json(nullptr);
  j["from_cache"] = r.from_cache;
  j["attempts"] = r.attempts;
  j["failure"] = r.failure ? json(*r.failure) : json(nullptr);
  return j;
}

namespace {

std::string cache_name(const std::string& sample_id, const std::string& hash) {
  std::string safe;
  for (char c : sample_id) safe.push_back(is_word_char(c) || c == '-' || c == '.' ? c : '_');
  if (safe.size() > 80) safe.resize(80);
  return safe + "." + hex64(fnv1a64(sample_id)).substr(0, 8) + "." + hash + ".json";
}

std::optional<std::string> read_cache(const std::filesystem::path& file, const std::string& sample_id,
                                      const std::string& hash) {
  if (!std::filesystem::exists(file)) return std::nullopt;
  try {
    const auto j = json::parse(read_file(file));
    if (j.at("sample_id").get<std::string>() != sample_id || j.at("prompt_hash").get<std::string>() != hash)
      return std::nullopt;
    return j.at("raw_response").get<std::string>();
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries are refetched and overwritten
  }
}

void write_cache(const std::filesystem::path& file, const std::string& sample_id, const std::string& hash,
                 const std::string& raw) {
  json j;
  j["sample_id"] = sample_id;
  j["prompt_hash"] = hash;
  j["raw_response"] = raw;
  j["timestamp"] = iso8601(unix_now());
  auto tmp = file;
  tmp += ".tmp";
  write_file(tmp, j.dump(2) + "\n");
  std::filesystem::rename(tmp, file);
}

}  // namespace

EvalRunResult run_llm_eval(const std::vector<Sample>& samples, ChatClient& client, const EvalRunConfig& config) {
  if (config.max_retries < 0) throw ContractError("max retries must be non-negative");
  if (!config.cache_dir.empty()) std::filesystem::create_directories(config.cache_dir);
  const auto sleep = config.sleep ? config.sleep : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

  EvalRunResult out;
  out.records.resize(samples.size());
  std::atomic<std::size_t> next{0}, calls{0};
  std::mutex cache_mu;

  auto process = [&](const Sample& s, SampleRecord& rec) {
    const auto messages = build_prompt(s, config.prompt);
    const auto hash = prompt_hash(messages);
    std::filesystem::path file;
    std::optional<std::string> raw;
    if (!config.cache_dir.empty()) {
      file = config.cache_dir / cache_name(s.sample_id, hash);
      raw = read_cache(file, s.sample_id, hash);
    }
    if (raw) {
      rec.from_cache = true;
    } else {
      for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        ++rec.attempts;
        ++calls;
        try {
          raw = client.complete(messages);
          break;
        } catch (const TransientError& e) {
          rec.failure = e.what();
          if (attempt < config.max_retries) sleep(config.base_backoff * (1 << attempt));
        } catch (const std::exception& e) {
          rec.failure = e.what();
          break;
        }
      }
      if (raw) {
        rec.failure.reset();
        if (!file.empty()) {
          std::lock_guard lock(cache_mu);
          write_cache(file, s.sample_id, hash, *raw);
        }
      }
    }
    if (raw) {
      rec.parsed = parse_response(*raw, s.sample_id);
    } else {
      rec.parsed.sample_id = s.sample_id;
      rec.parsed.status = ParseStatus::kMalformed;
    }
  };

  auto work = [&] {
    for (std::size_t i = next++; i < samples.size(); i = next++) {
      try {
        process(samples[i], out.records[i]);
      } catch (const std::exception& e) {
        out.records[i].failure = e.what();
        out.records[i].parsed.sample_id = samples[i].sample_id;
        out.records[i].parsed.status = ParseStatus::kMalformed;
      }
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(config.concurrency, static_cast<unsigned>(samples.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  out.client_calls = calls.load();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& rec = out.records[i];
    if (rec.from_cache) ++out.cache_hits;
    if (rec.failure) ++out.failures;
    else if (rec.parsed.status != ParseStatus::kOk) ++out.unparsed;
    out.predictions.push_back(make_prediction(samples[i], rec.parsed.label));
  }
  out.report = compute_metrics(out.predictions);
  return out;
}

}  // namespace tvcp::llm
