#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tvcp/schema.hpp"

namespace tvcp {

// A single duration annotation: a class on the scale, or "no time-sensitive
// information" (stationary).
struct Vote {
  std::optional<DurationClass> duration;  // nullopt == stationary

  static Vote stationary() { return Vote{}; }
  static Vote of(DurationClass c) { return Vote{c}; }
  bool is_stationary() const noexcept { return !duration.has_value(); }
  friend bool operator==(const Vote&, const Vote&) = default;
};

inline constexpr std::string_view kStationaryToken = "stationary";

Vote parse_vote(std::string_view token);
std::string_view to_string(const Vote& v) noexcept;

enum class TargetStatus { kPending, kAccepted, kDiscarded };
std::string_view to_string(TargetStatus s) noexcept;

struct TargetStatement {
  std::string target_id;
  StatementStamp statement;
  std::vector<Vote> votes;
  std::optional<DurationClass> resolved;
  TargetStatus status = TargetStatus::kPending;
};

// Target-side duration rule: the scale ends are not valid target durations.
bool is_accepted_target_duration(DurationClass c) noexcept;

struct Sample {
  std::string sample_id;
  std::string target_id;
  std::string target_text;
  std::string followup_text;
  DurationClass original = DurationClass::k2To6h;
  DurationClass updated = DurationClass::k2To6h;
  TvcpLabel label = TvcpLabel::kUnc;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();  // unknown fields, kept verbatim

  int delta() const noexcept { return change_delta(original, updated); }
};

nlohmann::ordered_json to_json(const Sample& s);
std::string to_jsonl(const std::vector<Sample>& samples);
void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples);

enum class ValidationMode { kStrict, kLenient };

struct ValidationIssue {
  std::size_t line = 0;  // 0 when the issue concerns a whole group
  std::string sample_id;
  std::string target_id;
  std::string message;
};

struct ValidationReport {
  std::size_t records_read = 0;
  std::size_t records_kept = 0;
  std::vector<ValidationIssue> issues;
  bool ok() const noexcept { return issues.empty(); }
};

struct LoadResult {
  std::vector<Sample> samples;
  ValidationReport report;
};

// Malformed lines throw ParseError in both modes. Invariant breaches throw
// ValidationError in strict mode and are dropped+reported in lenient mode.
LoadResult load_and_validate(const std::filesystem::path& path, ValidationMode mode);
LoadResult parse_and_validate(std::string_view jsonl, ValidationMode mode);

// --- vote aggregation -------------------------------------------------------

enum class DiscardReason { kBoundary, kStationary, kNoMajority };
std::string_view to_string(DiscardReason r) noexcept;

struct AggregateOutcome {
  enum class Kind { kAccepted, kDiscarded, kNeedsThirdVote };
  Kind kind;
  std::optional<DurationClass> duration;  // set iff accepted
  std::optional<DiscardReason> reason;    // set iff discarded

  static AggregateOutcome accepted(DurationClass c) { return {Kind::kAccepted, c, std::nullopt}; }
  static AggregateOutcome discarded(DiscardReason r) { return {Kind::kDiscarded, std::nullopt, r}; }
  static AggregateOutcome needs_third_vote() { return {Kind::kNeedsThirdVote, std::nullopt, std::nullopt}; }
  friend bool operator==(const AggregateOutcome&, const AggregateOutcome&) = default;
};

// Two agreeing votes resolve, two disagreeing votes ask for a third, three
// votes resolve by majority. Throws ContractError outside 2..3 votes.
AggregateOutcome aggregate_votes(const std::vector<Vote>& votes);

// --- splits -----------------------------------------------------------------

enum class Subset { kTrain, kVal, kTest };
std::string_view to_string(Subset s) noexcept;

struct FoldAssignment {
  std::map<std::string, Subset> by_target;
  std::vector<std::string> ids(Subset s) const;  // sorted
  std::size_t count(Subset s) const;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
  std::vector<FoldAssignment> folds;
};

std::vector<std::string> target_ids(const std::vector<Sample>& samples);  // sorted, unique

// Group k-fold: each target is tested in exactly one fold; the rest of each
// fold splits 7:1 into train:val by target count.
SplitPlan split_grouped_kfold(const std::vector<Sample>& samples, int folds, std::uint64_t seed);

// Single grouped train/val/test split with the given fractions (test = rest).
SplitPlan split_holdout(const std::vector<Sample>& samples, double train_fraction,
                        double val_fraction, std::uint64_t seed);

// Keeps ceil(fraction * |train|) train targets per fold; nested across
// fractions for a fixed seed.
SplitPlan subsample_training_fraction(const SplitPlan& plan, double fraction, std::uint64_t seed);

std::vector<Sample> select(const std::vector<Sample>& samples, const FoldAssignment& fold, Subset s);

nlohmann::ordered_json to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const nlohmann::ordered_json& j);
void save_split_plan(const std::filesystem::path& path, const SplitPlan& plan);
SplitPlan load_split_plan(const std::filesystem::path& path);

// --- statistics -------------------------------------------------------------

std::map<int, std::size_t> delta_distribution(const std::vector<Sample>& samples);

// --- synthetic data ---------------------------------------------------------

// Three samples (DEC, UNC, INC) per target from templated text; the label is
// recoverable from cue phrases in the follow-up. Deterministic per seed.
std::vector<Sample> synth_generate(int n_targets, std::uint64_t seed);

}  // namespace tvcp
