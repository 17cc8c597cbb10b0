#include "tvcp/filters.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tvcp/error.hpp"
#include "tvcp/util.hpp"

namespace tvcp {
namespace {

std::vector<std::string> words_of(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '\'' || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

const std::set<std::string> kAuxiliaries = {"am",    "i'm",  "im",     "will", "i'll", "we'll",  "gonna",
                                            "going", "'ll",  "we're",  "shall", "currently", "still"};
const std::set<std::string> kTimeNouns = {
    "today",  "tonight",  "tomorrow", "now",      "morning", "afternoon", "evening", "weekend",
    "minute", "minutes",  "hour",     "hours",    "soon",    "later",     "week",    "noon",
    "monday", "tuesday",  "wednesday", "thursday", "friday",  "saturday",  "sunday",  "o'clock"};
const std::set<std::string> kIngStoplist = {"thing", "things", "something", "nothing", "anything", "everything",
                                            "king",  "ring",   "spring",    "sing",    "bring",    "string",
                                            "wing",  "morning", "evening",  "during",  "ceiling"};

bool is_progressive(const std::string& w) {
  return w.size() > 4 && w.compare(w.size() - 3, 3, "ing") == 0 && !kIngStoplist.count(w);
}

bool contains_ci(const std::string& lower_text, std::string_view needle) {
  return lower_text.find(needle) != std::string::npos;
}

bool self_contained(std::string_view text) {
  const std::string t = to_lower(trim(text));
  if (t.rfind("rt ", 0) == 0 || t.rfind("rt:", 0) == 0 || t.rfind("@", 0) == 0) return false;
  for (std::string_view marker : {"http://", "https://", "www.", "pic.twitter.com", "[media]", "<media>",
                                  "[image]", "[video]", "[photo]", "rt @"})
    if (contains_ci(t, marker)) return false;
  return true;
}

bool is_known_stage(std::string_view s) {
  return s == stage::kSelfContained || s == stage::kLength || s == stage::kBlockedWords ||
         s == stage::kTemporalScore;
}

}  // namespace

std::size_t count_temporal_cues(std::string_view text) {
  std::size_t n = 0;
  for (const auto& w : words_of(text))
    if (kAuxiliaries.count(w) || kTimeNouns.count(w) || is_progressive(w)) ++n;
  return n;
}

ScorerHandle heuristic_temporal_scorer() {
  return {"heuristic_cues", [](std::string_view text) {
            return 1.0 - std::exp(-0.7 * static_cast<double>(count_temporal_cues(text)));
          }};
}

double stationarity_ensemble_score(std::string_view text, std::span<const ScorerHandle> scorers) {
  if (scorers.empty()) throw ContractError("ensemble needs at least one scorer");
  double sum = 0.0;
  for (const auto& s : scorers) {
    const double v = s.score(text);
    if (!(v >= 0.0 && v <= 1.0))
      throw ContractError("scorer '" + s.name + "' returned " + std::to_string(v) + ", outside [0, 1]");
    sum += v;
  }
  return sum / static_cast<double>(scorers.size());
}

std::vector<std::string> load_word_list(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto w = to_lower(trim(line));
    if (!w.empty() && w[0] != '#') out.push_back(std::move(w));
  }
  return out;
}

FilterChainConfig load_filter_chain_config(const std::filesystem::path& path) {
  FilterChainConfig cfg;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
    if (j.contains("stages")) cfg.stages = j.at("stages").get<std::vector<std::string>>();
    cfg.min_words = j.value("min_words", cfg.min_words);
    cfg.max_words = j.value("max_words", cfg.max_words);
    cfg.min_score = j.value("min_score", cfg.min_score);
    cfg.k = j.value("k", cfg.k);
    if (j.contains("blocked_words")) cfg.blocked_words = j.at("blocked_words").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("filter config '" + path.string() + "': " + e.what());
  }
  if (j.contains("word_list")) {
    std::filesystem::path wl = j.at("word_list").get<std::string>();
    if (wl.is_relative()) wl = path.parent_path() / wl;
    for (auto& w : load_word_list(wl)) cfg.blocked_words.push_back(std::move(w));
  }
  for (const auto& s : cfg.stages)
    if (!is_known_stage(s)) throw ConfigError("unknown filter stage '" + s + "'");
  return cfg;
}

std::vector<FilterVerdict> apply_filter_chain(const std::vector<CandidateStatement>& statements,
                                              const FilterChainConfig& config,
                                              std::span<const ScorerHandle> scorers) {
  for (const auto& s : config.stages)
    if (!is_known_stage(s)) throw ConfigError("unknown filter stage '" + s + "'");
  std::vector<ScorerHandle> defaults;
  if (scorers.empty()) {
    defaults.push_back(heuristic_temporal_scorer());
    scorers = defaults;
  }
  std::set<std::string> blocked;
  for (const auto& w : config.blocked_words) blocked.insert(to_lower(w));

  std::vector<FilterVerdict> out(statements.size());
  parallel_for(statements.size(), [&](std::size_t i) {
    const auto& st = statements[i];
    FilterVerdict v{st.id, true, std::nullopt, {}};
    for (const auto& name : config.stages) {
      bool ok = true;
      if (name == stage::kSelfContained) {
        ok = self_contained(st.text);
      } else if (name == stage::kLength) {
        const auto n = words_of(st.text).size();
        ok = n >= config.min_words && n <= config.max_words;
      } else if (name == stage::kBlockedWords) {
        const auto ws = words_of(st.text);
        ok = std::none_of(ws.begin(), ws.end(), [&](const std::string& w) { return blocked.count(w) > 0; });
      } else if (name == stage::kTemporalScore) {
        double sum = 0.0;
        for (const auto& sc : scorers) {
          const double val = sc.score(st.text);
          if (!(val >= 0.0 && val <= 1.0))
            throw ContractError("scorer '" + sc.name + "' returned " + std::to_string(val) + ", outside [0, 1]");
          v.scores[sc.name] = val;
          sum += val;
        }
        const double ens = sum / static_cast<double>(scorers.size());
        v.scores[std::string(kEnsembleScoreKey)] = ens;
        ok = ens >= config.min_score;
      }
      if (!ok) {
        v.passed = false;
        v.failing_stage = name;
        break;
      }
    }
    out[i] = std::move(v);
  });
  return out;
}

std::vector<std::string> select_candidates(const std::vector<FilterVerdict>& verdicts, std::size_t k) {
  std::vector<std::pair<double, const std::string*>> pool;
  for (const auto& v : verdicts) {
    if (!v.passed) continue;
    auto it = v.scores.find(std::string(kEnsembleScoreKey));
    pool.emplace_back(it == v.scores.end() ? 0.0 : it->second, &v.statement_id);
  }
  std::sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return *a.second < *b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, pool.size()); ++i) out.push_back(*pool[i].second);
  return out;
}

}  // namespace tvcp
