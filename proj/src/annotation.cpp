#include "tvcp/annotation.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include "tvcp/error.hpp"
#include "tvcp/util.hpp"

namespace tvcp::annotation {

using json = nlohmann::ordered_json;

std::string_view to_string(HitKind k) noexcept { return k == HitKind::kDuration ? "duration" : "followup"; }

std::string_view to_string(HitStatus s) noexcept {
  switch (s) {
    case HitStatus::kOpen: return "open";
    case HitStatus::kSubmitted: return "submitted";
    case HitStatus::kReviewed: return "reviewed";
  }
  return "?";
}

std::string_view to_string(ReviewState s) noexcept {
  switch (s) {
    case ReviewState::kPending: return "pending";
    case ReviewState::kApproved: return "approved";
    case ReviewState::kRejected: return "rejected";
    case ReviewState::kEdited: return "edited";
  }
  return "?";
}

HitKind parse_hit_kind(std::string_view s) {
  if (s == "duration") return HitKind::kDuration;
  if (s == "followup") return HitKind::kFollowup;
  throw ContractError("unknown task kind '" + std::string(s) + "'");
}

Decision parse_decision(std::string_view s) {
  if (s == "approve") return Decision::kApprove;
  if (s == "reject") return Decision::kReject;
  if (s == "edit") return Decision::kEdit;
  throw ContractError("unknown review decision '" + std::string(s) + "'");
}

namespace {

std::string_view to_string(Decision d) noexcept {
  switch (d) {
    case Decision::kApprove: return "approve";
    case Decision::kReject: return "reject";
    case Decision::kEdit: return "edit";
  }
  return "?";
}

std::string numbered(const char* prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06llu", prefix, static_cast<unsigned long long>(n));
  return buf;
}

json entry_json(const FollowUpEntry& e) {
  return {{"label", std::string(to_string(e.label))}, {"text", e.text}, {"updated", std::string(token_of(e.updated))}};
}

json entries_json(const std::vector<FollowUpEntry>& entries) {
  json a = json::array();
  for (const auto& e : entries) a.push_back(entry_json(e));
  return a;
}

std::vector<FollowUpEntry> entries_from(const json& a) {
  if (!a.is_array()) throw ContractError("entries must be a list");
  std::vector<FollowUpEntry> out;
  for (const auto& e : a) out.push_back(entry_from_json(e));
  return out;
}

AnnotatorProfile& profile(AnnotationState& s, const std::string& id) {
  auto [it, fresh] = s.annotators.try_emplace(id);
  if (fresh) it->second.annotator_id = id;
  return it->second;
}

void resolve(StatementRecord& st) {
  const auto outcome = aggregate_votes(st.target.votes);
  switch (outcome.kind) {
    case AggregateOutcome::Kind::kAccepted:
      st.target.status = TargetStatus::kAccepted;
      st.target.resolved = outcome.duration;
      break;
    case AggregateOutcome::Kind::kDiscarded:
      st.target.status = TargetStatus::kDiscarded;
      st.discard_reason = outcome.reason;
      break;
    case AggregateOutcome::Kind::kNeedsThirdVote:
      st.third_vote_requested = true;
      break;
  }
}

HitBatch& new_hit(AnnotationState& s, std::string id, HitKind kind, std::vector<std::string> ids, int required) {
  HitBatch h;
  h.hit_id = id;
  h.kind = kind;
  h.statement_ids = std::move(ids);
  h.assignments_required = required;
  s.hit_order.push_back(id);
  return s.hits[id] = std::move(h);
}

void on_duration_votes(AnnotationState& s, const json& p) {
  auto& hit = s.hits.at(p.at("hit_id").get<std::string>());
  const auto annotator = p.at("annotator_id").get<std::string>();
  const auto& votes = p.at("votes");
  for (const auto& sid : hit.statement_ids) {
    auto& st = s.statements.at(sid);
    st.target.votes.push_back(parse_vote(votes.at(sid).get<std::string>()));
    st.voters.push_back(annotator);
  }
  profile(s, annotator);
  hit.submitted_by.push_back(annotator);
  if (static_cast<int>(hit.submitted_by.size()) < hit.assignments_required) return;
  hit.status = HitStatus::kSubmitted;

  std::vector<std::string> third;
  std::set<std::string> excluded;
  for (const auto& sid : hit.statement_ids) {
    auto& st = s.statements.at(sid);
    if (st.target.status != TargetStatus::kPending || st.target.votes.size() < 2) continue;
    resolve(st);
    if (st.target.status == TargetStatus::kPending && st.third_vote_requested && st.target.votes.size() == 2) {
      third.push_back(sid);
      excluded.insert(st.voters.begin(), st.voters.end());
    }
  }
  if (!third.empty()) {
    auto& h = new_hit(s, numbered("hit", s.next_hit++), HitKind::kDuration, std::move(third), 1);
    h.third_vote = true;
    h.excluded = std::move(excluded);
  }
}

void on_followups(AnnotationState& s, const json& p, std::int64_t ts) {
  FollowUpSubmission sub;
  sub.submission_id = p.at("submission_id").get<std::string>();
  sub.hit_id = p.at("hit_id").get<std::string>();
  sub.annotator_id = p.at("annotator_id").get<std::string>();
  sub.entries = entries_from(p.at("entries"));
  sub.submitted_at = ts;
  auto& hit = s.hits.at(sub.hit_id);
  sub.target_id = hit.statement_ids.front();
  hit.submitted_by.push_back(sub.annotator_id);

  auto& a = profile(s, sub.annotator_id);
  sub.ordinal = ++a.followup_submissions;
  // Untrusted annotators are always checked; trusted ones on every 5th submission.
  sub.queued = !a.trusted() || sub.ordinal % kSpotCheckEvery == 0;
  if (sub.queued) {
    if (static_cast<int>(hit.submitted_by.size()) >= hit.assignments_required) hit.status = HitStatus::kSubmitted;
  } else {
    sub.state = ReviewState::kApproved;
    ++a.approved;
    if (static_cast<int>(hit.submitted_by.size()) >= hit.assignments_required) hit.status = HitStatus::kReviewed;
  }
  s.submission_order.push_back(sub.submission_id);
  s.next_submission = std::max(s.next_submission, s.submission_order.size() + 1);
  s.submissions[sub.submission_id] = std::move(sub);
}

void on_reviewed(AnnotationState& s, const json& p) {
  auto& sub = s.submissions.at(p.at("submission_id").get<std::string>());
  const auto decision = parse_decision(p.at("decision").get<std::string>());
  sub.reviewer_id = p.at("reviewer_id").get<std::string>();
  sub.feedback = p.value("feedback", std::string());
  auto& a = profile(s, sub.annotator_id);
  switch (decision) {
    case Decision::kApprove:
      sub.state = ReviewState::kApproved;
      ++a.approved;
      break;
    case Decision::kEdit:
      sub.entries = entries_from(p.at("entries"));
      sub.state = ReviewState::kEdited;
      ++a.approved;
      break;
    case Decision::kReject:
      sub.state = ReviewState::kRejected;
      ++a.rejected;
      break;
  }
  s.hits.at(sub.hit_id).status = HitStatus::kReviewed;
}

}  // namespace

FollowUpEntry entry_from_json(const json& j) {
  try {
    FollowUpEntry e;
    e.label = parse_tvcp_label(j.at("label").get<std::string>());
    e.text = j.at("text").get<std::string>();
    e.updated = parse_duration(j.at("updated").get<std::string>());
    return e;
  } catch (const json::exception& ex) {
    throw ContractError(std::string("malformed follow-up entry: ") + ex.what());
  } catch (const SchemaError& ex) {
    throw ContractError(std::string("malformed follow-up entry: ") + ex.what());
  }
}

json to_json(const AnnotationEvent& e) {
  return {{"seq", e.seq}, {"kind", e.kind}, {"timestamp", e.timestamp}, {"payload", e.payload}};
}

AnnotationEvent event_from_json(const json& j) {
  AnnotationEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.kind = j.at("kind").get<std::string>();
  e.timestamp = j.at("timestamp").get<std::int64_t>();
  e.payload = j.at("payload");
  return e;
}

void apply_event(AnnotationState& s, const AnnotationEvent& e) {
  if (e.seq != s.last_seq + 1)
    throw StateError("event sequence gap: expected " + std::to_string(s.last_seq + 1) + ", got " +
                     std::to_string(e.seq));
  const auto& p = e.payload;
  if (e.kind == "statement_added") {
    StatementRecord r;
    r.target.target_id = p.at("statement_id").get<std::string>();
    r.target.statement.text = p.at("text").get<std::string>();
    if (p.contains("created_at") && !p.at("created_at").is_null())
      r.target.statement.created_at = p.at("created_at").get<std::int64_t>();
    s.statement_order.push_back(r.target.target_id);
    s.statements[r.target.target_id] = std::move(r);
  } else if (e.kind == "qualification_set") {
    profile(s, p.at("annotator_id").get<std::string>()).qualified = p.at("qualified").get<bool>();
  } else if (e.kind == "hit_created") {
    new_hit(s, p.at("hit_id").get<std::string>(), parse_hit_kind(p.at("kind").get<std::string>()),
            p.at("statement_ids").get<std::vector<std::string>>(), p.at("assignments_required").get<int>());
    ++s.next_hit;
  } else if (e.kind == "duration_votes") {
    on_duration_votes(s, p);
  } else if (e.kind == "followups_submitted") {
    on_followups(s, p, e.timestamp);
  } else if (e.kind == "reviewed") {
    on_reviewed(s, p);
  } else if (e.kind == "annotator_blocked") {
    profile(s, p.at("annotator_id").get<std::string>()).blocked = true;
  } else {
    throw StateError("unknown event kind '" + e.kind + "'");
  }
  s.last_seq = e.seq;
}

AnnotationState fold_events(const std::vector<AnnotationEvent>& events) {
  AnnotationState s;
  for (const auto& e : events) apply_event(s, e);
  return s;
}

std::vector<std::vector<std::string>> chunk(const std::vector<std::string>& ids, std::size_t size) {
  if (size == 0) throw ContractError("chunk size must be positive");
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < ids.size(); i += size)
    out.emplace_back(ids.begin() + static_cast<long>(i), ids.begin() + static_cast<long>(std::min(ids.size(), i + size)));
  return out;
}

std::vector<std::string> validate_followup_entries(DurationClass original, const std::vector<FollowUpEntry>& entries) {
  std::vector<std::string> errors;
  if (entries.size() < kAllTvcpLabels.size()) errors.push_back("incomplete submission");
  if (entries.size() > kAllTvcpLabels.size()) errors.push_back("too many entries");
  std::set<TvcpLabel> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string where = "entry " + std::to_string(i + 1) + ": ";
    if (!seen.insert(e.label).second) errors.push_back(where + "duplicate class " + std::string(to_string(e.label)));
    if (is_blank(e.text)) errors.push_back(where + "empty text");
    if (derive_tvcp_label(original, e.updated) != e.label)
      errors.push_back(where + "label/duration mismatch (" + std::string(to_string(e.label)) + " with " +
                       std::string(token_of(original)) + " -> " + std::string(token_of(e.updated)) + ")");
  }
  return errors;
}

// --- serialization ----------------------------------------------------------

json to_json(const HitBatch& h, const AnnotationState& state) {
  json j;
  j["hit_id"] = h.hit_id;
  j["kind"] = std::string(to_string(h.kind));
  j["status"] = std::string(to_string(h.status));
  j["assignments_required"] = h.assignments_required;
  j["submitted_by"] = h.submitted_by;
  j["third_vote"] = h.third_vote;
  j["excluded"] = h.excluded;
  json items = json::array();
  for (const auto& sid : h.statement_ids) {
    const auto& st = state.statements.at(sid);
    json it{{"statement_id", sid}, {"text", st.target.statement.text}};
    if (st.target.resolved) {
      it["duration"] = std::string(token_of(*st.target.resolved));
      it["duration_display"] = std::string(display_name(*st.target.resolved));
    }
    items.push_back(it);
  }
  j["statements"] = items;
  return j;
}

json to_json(const AnnotatorProfile& a) {
  return {{"annotator_id", a.annotator_id}, {"approved", a.approved}, {"rejected", a.rejected},
          {"followup_submissions", a.followup_submissions}, {"qualified", a.qualified},
          {"blocked", a.blocked}, {"trusted", a.trusted()}};
}

json to_json(const FollowUpSubmission& s) {
  return {{"submission_id", s.submission_id}, {"hit_id", s.hit_id},         {"annotator_id", s.annotator_id},
          {"target_id", s.target_id},         {"ordinal", s.ordinal},       {"queued", s.queued},
          {"state", std::string(to_string(s.state))}, {"reviewer_id", s.reviewer_id}, {"feedback", s.feedback},
          {"submitted_at", s.submitted_at},   {"entries", entries_json(s.entries)}};
}

json to_json(const AnnotationState& s) {
  json j;
  j["last_seq"] = s.last_seq;
  j["next_hit"] = s.next_hit;
  j["next_submission"] = s.next_submission;
  json sts = json::array();
  for (const auto& id : s.statement_order) {
    const auto& st = s.statements.at(id);
    json votes = json::array();
    for (const auto& v : st.target.votes) votes.push_back(std::string(to_string(v)));
    sts.push_back({{"id", id},
                   {"text", st.target.statement.text},
                   {"created_at", st.target.statement.created_at ? json(*st.target.statement.created_at) : json()},
                   {"votes", votes},
                   {"voters", st.voters},
                   {"status", std::string(to_string(st.target.status))},
                   {"resolved", st.target.resolved ? json(std::string(token_of(*st.target.resolved))) : json()},
                   {"discard_reason", st.discard_reason ? json(std::string(to_string(*st.discard_reason))) : json()},
                   {"third_vote_requested", st.third_vote_requested}});
  }
  j["statements"] = sts;
  json hits = json::array();
  for (const auto& id : s.hit_order) hits.push_back(to_json(s.hits.at(id), s));
  j["hits"] = hits;
  json ann = json::array();
  for (const auto& [id, a] : s.annotators) ann.push_back(to_json(a));
  j["annotators"] = ann;
  json subs = json::array();
  for (const auto& id : s.submission_order) subs.push_back(to_json(s.submissions.at(id)));
  j["submissions"] = subs;
  return j;
}

// --- service ----------------------------------------------------------------

AnnotationService::AnnotationService(std::optional<std::filesystem::path> log_path, Clock clock)
    : log_path_(std::move(log_path)), clock_(clock ? std::move(clock) : Clock(unix_now)) {
  if (!log_path_ || !std::filesystem::exists(*log_path_)) return;
  std::istringstream in(read_file(*log_path_));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      events_.push_back(event_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(n, log_path_->string() + ": " + e.what());
    }
  }
  state_ = fold_events(events_);
}

void AnnotationService::append(std::string kind, json payload) {
  AnnotationEvent e{state_.last_seq + 1, std::move(kind), clock_(), std::move(payload)};
  AnnotationState next = state_;
  apply_event(next, e);
  if (log_path_) append_line(*log_path_, to_json(e).dump());
  events_.push_back(std::move(e));
  state_ = std::move(next);
}

void AnnotationService::add_statement(const std::string& statement_id, const std::string& text,
                                      std::optional<std::int64_t> created_at) {
  if (is_blank(statement_id)) throw ContractError("statement id must be non-empty");
  StatementStamp::make(text, created_at);
  std::unique_lock lock(mu_);
  if (state_.statements.count(statement_id)) throw ConflictError("statement '" + statement_id + "' already exists");
  append("statement_added",
         {{"statement_id", statement_id}, {"text", text}, {"created_at", created_at ? json(*created_at) : json()}});
}

void AnnotationService::set_qualified(const std::string& annotator_id, bool qualified) {
  if (is_blank(annotator_id)) throw ContractError("annotator id must be non-empty");
  std::unique_lock lock(mu_);
  append("qualification_set", {{"annotator_id", annotator_id}, {"qualified", qualified}});
}

std::vector<HitBatch> AnnotationService::create_hit_batches(const std::vector<std::string>& ids, HitKind kind) {
  std::unique_lock lock(mu_);
  std::set<std::string> seen;
  for (const auto& id : ids) {
    auto it = state_.statements.find(id);
    if (it == state_.statements.end()) throw NotFoundError("unknown statement '" + id + "'");
    if (!seen.insert(id).second) throw ContractError("statement '" + id + "' listed twice");
    if (kind == HitKind::kFollowup && it->second.target.status != TargetStatus::kAccepted)
      throw ContractError("follow-up task for target '" + id + "' which is " +
                          std::string(to_string(it->second.target.status)) + ", not accepted");
  }
  const auto groups = kind == HitKind::kDuration ? chunk(ids, kDurationBatchSize) : chunk(ids, 1);
  std::vector<HitBatch> out;
  for (const auto& g : groups) {
    const auto id = numbered("hit", state_.next_hit);
    append("hit_created", {{"hit_id", id},
                           {"kind", std::string(to_string(kind))},
                           {"statement_ids", g},
                           {"assignments_required", kind == HitKind::kDuration ? kDurationAssignments : 1}});
    out.push_back(state_.hits.at(id));
  }
  return out;
}

std::optional<HitBatch> AnnotationService::next_hit(HitKind kind, const std::string& annotator_id) const {
  std::shared_lock lock(mu_);
  if (auto a = state_.annotators.find(annotator_id); a != state_.annotators.end() && a->second.blocked)
    throw StateError("annotator '" + annotator_id + "' is blocked");
  for (const auto& id : state_.hit_order) {
    const auto& h = state_.hits.at(id);
    if (h.kind != kind || h.status != HitStatus::kOpen || h.excluded.count(annotator_id)) continue;
    if (std::find(h.submitted_by.begin(), h.submitted_by.end(), annotator_id) != h.submitted_by.end()) continue;
    bool voted = false;
    for (const auto& sid : h.statement_ids) {
      const auto& v = state_.statements.at(sid).voters;
      voted = voted || std::find(v.begin(), v.end(), annotator_id) != v.end();
    }
    if (kind == HitKind::kDuration && voted) continue;
    return h;
  }
  return std::nullopt;
}

const HitBatch& AnnotationService::open_hit(const std::string& hit_id, HitKind kind,
                                            const std::string& annotator_id) const {
  if (is_blank(annotator_id)) throw ContractError("annotator id must be non-empty");
  auto it = state_.hits.find(hit_id);
  if (it == state_.hits.end()) throw NotFoundError("unknown HIT '" + hit_id + "'");
  const auto& h = it->second;
  if (h.kind != kind) throw ContractError("HIT '" + hit_id + "' is a " + std::string(to_string(h.kind)) + " task");
  if (auto a = state_.annotators.find(annotator_id); a != state_.annotators.end() && a->second.blocked)
    throw StateError("annotator '" + annotator_id + "' is blocked");
  if (h.status != HitStatus::kOpen) throw StateError("HIT '" + hit_id + "' is " + std::string(to_string(h.status)));
  if (h.excluded.count(annotator_id))
    throw ConflictError("annotator '" + annotator_id + "' already voted on statements of HIT '" + hit_id + "'");
  if (std::find(h.submitted_by.begin(), h.submitted_by.end(), annotator_id) != h.submitted_by.end())
    throw ConflictError("annotator '" + annotator_id + "' already submitted HIT '" + hit_id + "'");
  return h;
}

void AnnotationService::submit_duration_votes(const std::string& hit_id, const std::string& annotator_id,
                                              const std::map<std::string, Vote>& votes) {
  std::unique_lock lock(mu_);
  const auto& h = open_hit(hit_id, HitKind::kDuration, annotator_id);
  std::vector<std::string> missing;
  for (const auto& sid : h.statement_ids) {
    if (!votes.count(sid)) missing.push_back(sid);
    const auto& voters = state_.statements.at(sid).voters;
    if (std::find(voters.begin(), voters.end(), annotator_id) != voters.end())
      throw ConflictError("annotator '" + annotator_id + "' already voted on statement '" + sid + "'");
  }
  if (!missing.empty()) throw ValidationError("one vote per statement required; missing", missing);
  std::vector<std::string> extra;
  for (const auto& [sid, _] : votes)
    if (std::find(h.statement_ids.begin(), h.statement_ids.end(), sid) == h.statement_ids.end()) extra.push_back(sid);
  if (!extra.empty()) throw ValidationError("votes for statements outside the HIT", extra);
  json v = json::object();
  for (const auto& sid : h.statement_ids) v[sid] = std::string(to_string(votes.at(sid)));
  append("duration_votes", {{"hit_id", hit_id}, {"annotator_id", annotator_id}, {"votes", v}});
}

std::string AnnotationService::submit_followups(const std::string& hit_id, const std::string& annotator_id,
                                                const std::vector<FollowUpEntry>& entries) {
  std::unique_lock lock(mu_);
  const auto& h = open_hit(hit_id, HitKind::kFollowup, annotator_id);
  const auto& target = state_.statements.at(h.statement_ids.front()).target;
  const auto errors = validate_followup_entries(*target.resolved, entries);
  if (!errors.empty()) throw ValidationError("follow-up submission rejected", errors);
  const auto id = numbered("sub", state_.next_submission);
  append("followups_submitted",
         {{"submission_id", id}, {"hit_id", hit_id}, {"annotator_id", annotator_id}, {"entries", entries_json(entries)}});
  return id;
}

void AnnotationService::review_submission(const std::string& reviewer_id, const std::string& submission_id,
                                          Decision decision, const std::string& feedback,
                                          const std::vector<FollowUpEntry>& edited) {
  if (is_blank(reviewer_id)) throw ContractError("reviewer id must be non-empty");
  std::unique_lock lock(mu_);
  auto it = state_.submissions.find(submission_id);
  if (it == state_.submissions.end()) throw NotFoundError("unknown submission '" + submission_id + "'");
  if (it->second.state != ReviewState::kPending)
    throw StateError("submission '" + submission_id + "' is already " + std::string(to_string(it->second.state)));
  json payload{{"submission_id", submission_id},
               {"reviewer_id", reviewer_id},
               {"decision", std::string(to_string(decision))},
               {"feedback", feedback}};
  if (decision == Decision::kEdit) {
    const auto& target = state_.statements.at(it->second.target_id).target;
    const auto errors = validate_followup_entries(*target.resolved, edited);
    if (!errors.empty()) throw ValidationError("edited entries rejected", errors);
    payload["entries"] = entries_json(edited);
  }
  append("reviewed", std::move(payload));
}

void AnnotationService::block_annotator(const std::string& annotator_id, const std::string& reviewer_id) {
  if (is_blank(annotator_id)) throw ContractError("annotator id must be non-empty");
  std::unique_lock lock(mu_);
  append("annotator_blocked", {{"annotator_id", annotator_id}, {"reviewer_id", reviewer_id}});
}

std::vector<FollowUpSubmission> AnnotationService::review_queue() const {
  std::shared_lock lock(mu_);
  std::vector<FollowUpSubmission> out;
  for (const auto& id : state_.submission_order) {
    const auto& s = state_.submissions.at(id);
    if (s.state == ReviewState::kPending) out.push_back(s);
  }
  return out;
}

ExportResult AnnotationService::export_samples() const {
  std::shared_lock lock(mu_);
  ExportResult r;
  std::map<std::string, std::size_t> discarded{{"boundary", 0}, {"stationary", 0}, {"no_majority", 0}};
  std::size_t accepted = 0, accepted_third = 0, pending = 0, awaiting_third = 0, disc_two = 0, disc_three = 0;
  std::size_t exported = 0, without = 0, skipped = 0;
  std::map<std::string, std::size_t> review{{"pending", 0}, {"approved", 0}, {"rejected", 0}, {"edited", 0}};
  for (const auto& id : state_.submission_order) ++review[std::string(to_string(state_.submissions.at(id).state))];

  for (const auto& id : state_.statement_order) {
    const auto& st = state_.statements.at(id);
    const bool third = st.target.votes.size() >= 3;
    switch (st.target.status) {
      case TargetStatus::kPending:
        ++pending;
        if (st.third_vote_requested) ++awaiting_third;
        continue;
      case TargetStatus::kDiscarded:
        ++discarded[std::string(to_string(*st.discard_reason))];
        ++(third ? disc_three : disc_two);
        continue;
      case TargetStatus::kAccepted:
        ++accepted;
        if (third) ++accepted_third;
        break;
    }
    const FollowUpSubmission* chosen = nullptr;
    for (const auto& sid : state_.submission_order) {
      const auto& s = state_.submissions.at(sid);
      if (s.target_id != id || (s.state != ReviewState::kApproved && s.state != ReviewState::kEdited)) continue;
      if (chosen) ++skipped;
      else chosen = &s;
    }
    if (!chosen) {
      ++without;
      continue;
    }
    ++exported;
    auto entries = chosen->entries;
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.label < b.label; });
    for (const auto& e : entries) {
      Sample smp;
      smp.sample_id = id + "-" + to_lower(to_string(e.label));
      smp.target_id = id;
      smp.target_text = st.target.statement.text;
      smp.followup_text = e.text;
      smp.original = *st.target.resolved;
      smp.updated = e.updated;
      smp.label = e.label;
      r.samples.push_back(std::move(smp));
    }
  }
  r.manifest = {{"statements", state_.statements.size()},
                {"accepted_targets", accepted},
                {"accepted_after_third_vote", accepted_third},
                {"pending_targets", pending},
                {"awaiting_third_vote", awaiting_third},
                {"discarded", discarded},
                {"discarded_without_third_vote", disc_two},
                {"discarded_after_third_vote", disc_three},
                {"targets_exported", exported},
                {"targets_without_approved_followups", without},
                {"extra_approved_submissions_skipped", skipped},
                {"samples", r.samples.size()},
                {"submissions", review},
                {"events", state_.last_seq}};
  return r;
}

ExportResult AnnotationService::export_dataset(const std::filesystem::path& destination) const {
  auto r = export_samples();
  try {
    save_dataset(destination / "dataset.jsonl", r.samples);
    write_file(destination / "manifest.json", r.manifest.dump(2) + "\n");
  } catch (const std::exception& e) {
    throw IoError("export to '" + destination.string() + "' failed: " + e.what());
  }
  return r;
}

AnnotationState AnnotationService::snapshot() const {
  std::shared_lock lock(mu_);
  return state_;
}

std::vector<AnnotationEvent> AnnotationService::events() const {
  std::shared_lock lock(mu_);
  return events_;
}

HitBatch AnnotationService::hit(const std::string& hit_id) const {
  std::shared_lock lock(mu_);
  auto it = state_.hits.find(hit_id);
  if (it == state_.hits.end()) throw NotFoundError("unknown HIT '" + hit_id + "'");
  return it->second;
}

AnnotatorProfile AnnotationService::annotator(const std::string& annotator_id) const {
  std::shared_lock lock(mu_);
  auto it = state_.annotators.find(annotator_id);
  if (it == state_.annotators.end()) throw NotFoundError("unknown annotator '" + annotator_id + "'");
  return it->second;
}

}  // namespace tvcp::annotation
