#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tvcp {

struct CandidateStatement {
  std::string id;
  std::string text;
};

// Scores a statement in [0, 1]; higher means more likely to carry temporal
// (non-stationary) information. Must be pure.
struct ScorerHandle {
  std::string name;
  std::function<double(std::string_view)> score;
};

// Built-in cue-counting scorer (tense auxiliaries, time nouns, progressive forms).
ScorerHandle heuristic_temporal_scorer();
std::size_t count_temporal_cues(std::string_view text);

// Mean of member scores. Throws ContractError naming a scorer whose output
// falls outside [0, 1], or when no scorer is given.
double stationarity_ensemble_score(std::string_view text, std::span<const ScorerHandle> scorers);

inline constexpr std::string_view kEnsembleScoreKey = "ensemble";

struct FilterVerdict {
  std::string statement_id;
  bool passed = false;
  std::optional<std::string> failing_stage;
  std::map<std::string, double> scores;
};

namespace stage {
inline constexpr std::string_view kSelfContained = "self_contained";
inline constexpr std::string_view kLength = "length";
inline constexpr std::string_view kBlockedWords = "blocked_words";
inline constexpr std::string_view kTemporalScore = "temporal_score";
}  // namespace stage

struct FilterChainConfig {
  std::vector<std::string> stages = {std::string(stage::kSelfContained), std::string(stage::kLength),
                                     std::string(stage::kBlockedWords), std::string(stage::kTemporalScore)};
  std::size_t min_words = 3;
  std::size_t max_words = 60;
  std::vector<std::string> blocked_words;
  double min_score = 0.0;  // temporal_score rejects below this
  std::size_t k = 100;
};

// JSON keys: stages, min_words, max_words, word_list (path, one term per
// line, resolved relative to the config file), blocked_words, min_score, k.
FilterChainConfig load_filter_chain_config(const std::filesystem::path& path);
std::vector<std::string> load_word_list(const std::filesystem::path& path);

// One verdict per statement, in input order. Stages short-circuit at the
// first failure. Throws ConfigError on an unknown stage name.
std::vector<FilterVerdict> apply_filter_chain(const std::vector<CandidateStatement>& statements,
                                              const FilterChainConfig& config,
                                              std::span<const ScorerHandle> scorers = {});

// Top-k passing statements by ensemble score, ties by id ascending.
std::vector<std::string> select_candidates(const std::vector<FilterVerdict>& verdicts, std::size_t k);

}  // namespace tvcp
