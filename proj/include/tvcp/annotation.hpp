#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tvcp/dataset.hpp"
#include "tvcp/schema.hpp"

namespace tvcp::annotation {

inline constexpr std::size_t kDurationBatchSize = 10;
inline constexpr int kDurationAssignments = 2;
inline constexpr int kTrustThreshold = 20;
inline constexpr int kSpotCheckEvery = 5;

enum class HitKind { kDuration, kFollowup };
enum class HitStatus { kOpen, kSubmitted, kReviewed };
enum class ReviewState { kPending, kApproved, kRejected, kEdited };
enum class Decision { kApprove, kReject, kEdit };

std::string_view to_string(HitKind k) noexcept;
std::string_view to_string(HitStatus s) noexcept;
std::string_view to_string(ReviewState s) noexcept;
HitKind parse_hit_kind(std::string_view s);
Decision parse_decision(std::string_view s);

struct HitBatch {
  std::string hit_id;
  HitKind kind = HitKind::kDuration;
  std::vector<std::string> statement_ids;
  int assignments_required = 1;
  std::vector<std::string> submitted_by;  // annotators, in submission order
  std::set<std::string> excluded;         // earlier voters on a third-vote HIT
  bool third_vote = false;
  HitStatus status = HitStatus::kOpen;
};

struct StatementRecord {
  TargetStatement target;
  std::vector<std::string> voters;  // parallel to target.votes
  std::optional<DiscardReason> discard_reason;
  bool third_vote_requested = false;
};

struct AnnotatorProfile {
  std::string annotator_id;
  int approved = 0;
  int rejected = 0;
  int followup_submissions = 0;
  bool qualified = false;
  bool blocked = false;
  bool trusted() const noexcept { return !blocked && approved >= kTrustThreshold; }
};

struct FollowUpEntry {
  TvcpLabel label = TvcpLabel::kUnc;
  std::string text;
  DurationClass updated = DurationClass::k2To6h;
};

struct FollowUpSubmission {
  std::string submission_id;
  std::string hit_id;
  std::string annotator_id;
  std::string target_id;
  std::vector<FollowUpEntry> entries;
  int ordinal = 0;       // per-annotator submission counter, 1-based
  bool queued = false;   // routed to manual review
  ReviewState state = ReviewState::kPending;
  std::string reviewer_id;
  std::string feedback;
  std::int64_t submitted_at = 0;
};

struct AnnotationEvent {
  std::uint64_t seq = 0;
  std::string kind;
  std::int64_t timestamp = 0;
  nlohmann::ordered_json payload;
};

nlohmann::ordered_json to_json(const AnnotationEvent& e);
AnnotationEvent event_from_json(const nlohmann::ordered_json& j);

struct AnnotationState {
  std::uint64_t last_seq = 0;
  std::map<std::string, StatementRecord> statements;
  std::vector<std::string> statement_order;
  std::map<std::string, HitBatch> hits;
  std::vector<std::string> hit_order;
  std::map<std::string, AnnotatorProfile> annotators;
  std::map<std::string, FollowUpSubmission> submissions;
  std::vector<std::string> submission_order;
  std::uint64_t next_hit = 1;
  std::uint64_t next_submission = 1;
};

// Full canonical dump; two states are equal iff their dumps are.
nlohmann::ordered_json to_json(const AnnotationState& s);

// Events carry validated commands only; every derived effect (aggregation,
// third-vote HITs, review routing, counters) happens here, so replaying the
// log from empty reproduces the state exactly.
void apply_event(AnnotationState& state, const AnnotationEvent& e);
AnnotationState fold_events(const std::vector<AnnotationEvent>& events);

// Consecutive chunks of at most `size`.
std::vector<std::vector<std::string>> chunk(const std::vector<std::string>& ids, std::size_t size);

// Per-entry problems of a follow-up submission against the target's duration; empty when valid.
std::vector<std::string> validate_followup_entries(DurationClass original, const std::vector<FollowUpEntry>& entries);

nlohmann::ordered_json to_json(const HitBatch& h, const AnnotationState& state);
nlohmann::ordered_json to_json(const AnnotatorProfile& a);
nlohmann::ordered_json to_json(const FollowUpSubmission& s);
FollowUpEntry entry_from_json(const nlohmann::ordered_json& j);

struct ExportResult {
  std::vector<Sample> samples;
  nlohmann::ordered_json manifest;
};

class AnnotationService {
 public:
  using Clock = std::function<std::int64_t()>;

  // With a log path, existing events are replayed and new ones appended.
  explicit AnnotationService(std::optional<std::filesystem::path> log_path = std::nullopt, Clock clock = {});

  void add_statement(const std::string& statement_id, const std::string& text,
                     std::optional<std::int64_t> created_at = std::nullopt);
  void set_qualified(const std::string& annotator_id, bool qualified);
  std::vector<HitBatch> create_hit_batches(const std::vector<std::string>& statement_ids, HitKind kind);

  // nullopt when nothing is available for this annotator; StateError when blocked.
  std::optional<HitBatch> next_hit(HitKind kind, const std::string& annotator_id) const;
  void submit_duration_votes(const std::string& hit_id, const std::string& annotator_id,
                             const std::map<std::string, Vote>& votes);
  std::string submit_followups(const std::string& hit_id, const std::string& annotator_id,
                               const std::vector<FollowUpEntry>& entries);
  void review_submission(const std::string& reviewer_id, const std::string& submission_id, Decision decision,
                         const std::string& feedback, const std::vector<FollowUpEntry>& edited = {});
  void block_annotator(const std::string& annotator_id, const std::string& reviewer_id);

  std::vector<FollowUpSubmission> review_queue() const;
  ExportResult export_samples() const;
  ExportResult export_dataset(const std::filesystem::path& destination) const;  // dataset.jsonl + manifest.json

  AnnotationState snapshot() const;
  std::vector<AnnotationEvent> events() const;
  HitBatch hit(const std::string& hit_id) const;
  AnnotatorProfile annotator(const std::string& annotator_id) const;

 private:
  void append(std::string kind, nlohmann::ordered_json payload);  // caller holds the write lock
  const HitBatch& open_hit(const std::string& hit_id, HitKind kind, const std::string& annotator_id) const;

  std::optional<std::filesystem::path> log_path_;
  Clock clock_;
  mutable std::shared_mutex mu_;
  std::vector<AnnotationEvent> events_;
  AnnotationState state_;
};

}  // namespace tvcp::annotation
