#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>
#include <thread>

#include "tvcp/annotation.hpp"
#include "tvcp/annotation_server.hpp"
#include "tvcp/error.hpp"
#include "tvcp/util.hpp"

using namespace tvcp;
using namespace tvcp::annotation;
namespace fs = std::filesystem;
using D = DurationClass;
using json = nlohmann::json;

namespace {

AnnotationService::Clock fixed_clock() {
  auto t = std::make_shared<std::int64_t>(1'700'000'000);
  return [t] { return (*t)++; };
}

std::vector<FollowUpEntry> good_entries() {
  return {{TvcpLabel::kDec, "the trip got cut short", D::k15To45Min},
          {TvcpLabel::kUnc, "I love sunny days", D::k2To6h},
          {TvcpLabel::kInc, "we decided to stay overnight", D::k1To3Days}};
}

// Adds n statements and resolves each to 2h_6h with two agreeing voters.
std::vector<std::string> accepted_targets(AnnotationService& svc, int n, const std::string& prefix = "st") {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    ids.push_back(prefix + std::to_string(i));
    svc.add_statement(ids.back(), "heading to the beach with friends " + std::to_string(i));
  }
  for (const auto& h : svc.create_hit_batches(ids, HitKind::kDuration)) {
    std::map<std::string, Vote> votes;
    for (const auto& sid : h.statement_ids) votes[sid] = Vote::of(D::k2To6h);
    svc.submit_duration_votes(h.hit_id, "voter-a", votes);
    svc.submit_duration_votes(h.hit_id, "voter-b", votes);
  }
  return ids;
}

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Batches, Chunking) {
  AnnotationService svc({}, fixed_clock());
  std::vector<std::string> ids;
  for (int i = 0; i < 25; ++i) {
    ids.push_back("s" + std::to_string(i));
    svc.add_statement(ids.back(), "text number " + std::to_string(i));
  }
  const auto hits = svc.create_hit_batches(ids, HitKind::kDuration);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].statement_ids.size(), 10u);
  EXPECT_EQ(hits[1].statement_ids.size(), 10u);
  EXPECT_EQ(hits[2].statement_ids.size(), 5u);
  EXPECT_EQ(hits[0].assignments_required, 2);
  EXPECT_TRUE(svc.create_hit_batches({}, HitKind::kDuration).empty());
  EXPECT_THROW(svc.create_hit_batches({"nope"}, HitKind::kDuration), tvcp::NotFoundError);
  EXPECT_THROW(svc.add_statement("s0", "again"), tvcp::ConflictError);
}

TEST(Batches, FollowupNeedsAcceptedTarget) {
  AnnotationService svc({}, fixed_clock());
  const auto ids = accepted_targets(svc, 4);
  const auto hits = svc.create_hit_batches(ids, HitKind::kFollowup);
  ASSERT_EQ(hits.size(), 4u);
  for (const auto& h : hits) EXPECT_EQ(h.statement_ids.size(), 1u);

  svc.add_statement("stat", "Japan lies in Asia");
  const auto h = svc.create_hit_batches({"stat"}, HitKind::kDuration).front();
  svc.submit_duration_votes(h.hit_id, "a", {{"stat", Vote::stationary()}});
  svc.submit_duration_votes(h.hit_id, "b", {{"stat", Vote::stationary()}});
  EXPECT_THROW(svc.create_hit_batches({"stat"}, HitKind::kFollowup), tvcp::ContractError);
  svc.add_statement("fresh", "still pending");
  EXPECT_THROW(svc.create_hit_batches({"fresh"}, HitKind::kFollowup), tvcp::ContractError);
}

TEST(Votes, AgreementAcceptsTarget) {
  AnnotationService svc({}, fixed_clock());
  accepted_targets(svc, 1);
  const auto& st = svc.snapshot().statements.at("st0");
  EXPECT_EQ(st.target.status, TargetStatus::kAccepted);
  EXPECT_EQ(st.target.resolved, D::k2To6h);
  EXPECT_EQ(st.voters, (std::vector<std::string>{"voter-a", "voter-b"}));
}

TEST(Votes, DisagreementOpensThirdVoteForNewAnnotator) {
  AnnotationService svc({}, fixed_clock());
  svc.add_statement("a", "at the dentist");
  svc.add_statement("b", "eating lunch now");
  const auto h = svc.create_hit_batches({"a", "b"}, HitKind::kDuration).front();
  svc.submit_duration_votes(h.hit_id, "x", {{"a", Vote::of(D::k2To6h)}, {"b", Vote::of(D::k15To45Min)}});
  EXPECT_EQ(svc.hit(h.hit_id).status, HitStatus::kOpen);
  svc.submit_duration_votes(h.hit_id, "y", {{"a", Vote::of(D::k1To3Days)}, {"b", Vote::of(D::k15To45Min)}});
  EXPECT_EQ(svc.hit(h.hit_id).status, HitStatus::kSubmitted);

  const auto state = svc.snapshot();
  EXPECT_EQ(state.statements.at("b").target.status, TargetStatus::kAccepted);
  EXPECT_EQ(state.statements.at("a").target.status, TargetStatus::kPending);
  EXPECT_TRUE(state.statements.at("a").third_vote_requested);

  // the third-vote HIT is hidden from the first two voters
  EXPECT_FALSE(svc.next_hit(HitKind::kDuration, "x"));
  const auto third = svc.next_hit(HitKind::kDuration, "z");
  ASSERT_TRUE(third);
  EXPECT_TRUE(third->third_vote);
  EXPECT_EQ(third->statement_ids, std::vector<std::string>{"a"});
  EXPECT_THROW(svc.submit_duration_votes(third->hit_id, "x", {{"a", Vote::of(D::k2To6h)}}), tvcp::ConflictError);
  svc.submit_duration_votes(third->hit_id, "z", {{"a", Vote::of(D::k1To3Days)}});
  EXPECT_EQ(svc.snapshot().statements.at("a").target.resolved, D::k1To3Days);

  const auto m = svc.export_samples().manifest;
  EXPECT_EQ(m["accepted_after_third_vote"], 1);
}

TEST(Votes, StationaryAndNoMajorityDiscard) {
  AnnotationService svc({}, fixed_clock());
  svc.add_statement("s", "Japan lies in Asia");
  svc.add_statement("n", "going somewhere");
  const auto h = svc.create_hit_batches({"s", "n"}, HitKind::kDuration).front();
  svc.submit_duration_votes(h.hit_id, "a", {{"s", Vote::stationary()}, {"n", Vote::of(D::k2To6h)}});
  svc.submit_duration_votes(h.hit_id, "b", {{"s", Vote::stationary()}, {"n", Vote::of(D::k1To3Days)}});
  const auto t = svc.next_hit(HitKind::kDuration, "c");
  ASSERT_TRUE(t);
  svc.submit_duration_votes(t->hit_id, "c", {{"n", Vote::of(D::k3To7Days)}});
  const auto st = svc.snapshot();
  EXPECT_EQ(st.statements.at("s").discard_reason, DiscardReason::kStationary);
  EXPECT_EQ(st.statements.at("n").discard_reason, DiscardReason::kNoMajority);
  const auto m = svc.export_samples().manifest;
  EXPECT_EQ(m["discarded"]["stationary"], 1);
  EXPECT_EQ(m["discarded"]["no_majority"], 1);
  EXPECT_EQ(m["discarded_without_third_vote"], 1);
  EXPECT_EQ(m["discarded_after_third_vote"], 1);
}

TEST(Votes, Errors) {
  AnnotationService svc({}, fixed_clock());
  svc.add_statement("a", "at the gym");
  svc.add_statement("b", "at the pool");
  const auto h = svc.create_hit_batches({"a", "b"}, HitKind::kDuration).front();
  EXPECT_THROW(svc.submit_duration_votes(h.hit_id, "x", {{"a", Vote::of(D::k2To6h)}}), tvcp::ValidationError);
  EXPECT_THROW(svc.submit_duration_votes("hit-999999", "x", {}), tvcp::NotFoundError);
  const std::map<std::string, Vote> v{{"a", Vote::of(D::k2To6h)}, {"b", Vote::of(D::k2To6h)}};
  svc.submit_duration_votes(h.hit_id, "x", v);
  EXPECT_THROW(svc.submit_duration_votes(h.hit_id, "x", v), tvcp::ConflictError);
  svc.submit_duration_votes(h.hit_id, "y", v);
  EXPECT_THROW(svc.submit_duration_votes(h.hit_id, "z", v), tvcp::StateError);
  svc.block_annotator("bad", "rev");
  EXPECT_THROW(svc.next_hit(HitKind::kDuration, "bad"), tvcp::StateError);
}

TEST(Followups, ValidationMessages) {
  const auto ok = good_entries();
  EXPECT_TRUE(validate_followup_entries(D::k2To6h, ok).empty());

  auto unc = ok;
  unc[1].updated = D::k45MinTo2h;
  auto e = validate_followup_entries(D::k2To6h, unc);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_NE(e[0].find("label/duration mismatch"), std::string::npos);

  auto inc = ok;
  inc[2].updated = D::k2To6h;
  EXPECT_NE(validate_followup_entries(D::k2To6h, inc)[0].find("label/duration mismatch"), std::string::npos);

  auto two_inc = ok;
  two_inc[1] = {TvcpLabel::kInc, "another", D::k3To7Days};
  bool dup = false;
  for (const auto& m : validate_followup_entries(D::k2To6h, two_inc)) dup |= m.find("duplicate class") != std::string::npos;
  EXPECT_TRUE(dup);

  auto missing = ok;
  missing.pop_back();
  EXPECT_EQ(validate_followup_entries(D::k2To6h, missing).front(), "incomplete submission");

  auto blank = ok;
  blank[0].text = "  ";
  EXPECT_NE(validate_followup_entries(D::k2To6h, blank)[0].find("empty text"), std::string::npos);
}

TEST(Followups, SubmitValidatesServerSide) {
  AnnotationService svc({}, fixed_clock());
  const auto ids = accepted_targets(svc, 1);
  const auto h = svc.create_hit_batches(ids, HitKind::kFollowup).front();
  auto bad = good_entries();
  bad[0].updated = D::k1To4Weeks;
  try {
    svc.submit_followups(h.hit_id, "w", bad);
    FAIL();
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.ids().size(), 1u);
    EXPECT_EQ(e.ids()[0].rfind("entry 1: label/duration mismatch", 0), 0u);
  }
  EXPECT_TRUE(svc.snapshot().submissions.empty());
  const auto sid = svc.submit_followups(h.hit_id, "w", good_entries());
  EXPECT_EQ(sid, "sub-000001");
  EXPECT_THROW(svc.submit_followups(h.hit_id, "w2", good_entries()), tvcp::StateError);
}

TEST(Review, TrustThresholdAndSpotChecks) {
  AnnotationService svc({}, fixed_clock());
  const auto ids = accepted_targets(svc, 30);
  const auto hits = svc.create_hit_batches(ids, HitKind::kFollowup);
  std::vector<bool> queued;
  for (int i = 0; i < 30; ++i) {
    const auto known = svc.snapshot().annotators;
    const auto before = known.count("w") ? known.at("w") : AnnotatorProfile{};
    const auto sid = svc.submit_followups(hits[i].hit_id, "w", good_entries());
    const auto sub = svc.snapshot().submissions.at(sid);
    queued.push_back(sub.queued);
    if (i == 19) EXPECT_EQ(before.approved, 19);  // 19 approvals → still reviewed
    if (sub.queued) {
      EXPECT_EQ(sub.state, ReviewState::kPending);
      svc.review_submission("rev", sid, Decision::kApprove, "thanks");
    } else {
      EXPECT_EQ(sub.state, ReviewState::kApproved);
    }
    EXPECT_GE(svc.annotator("w").approved, before.approved);
  }
  for (int i = 0; i < 20; ++i) EXPECT_TRUE(queued[i]) << "submission " << i + 1;
  for (int n = 21; n <= 30; ++n) EXPECT_EQ(queued[n - 1], n % 5 == 0) << "submission " << n;
  EXPECT_TRUE(svc.annotator("w").trusted());
  EXPECT_EQ(svc.annotator("w").approved, 30);
}

TEST(Review, RejectEditAndStateErrors) {
  AnnotationService svc({}, fixed_clock());
  const auto ids = accepted_targets(svc, 3);
  const auto hits = svc.create_hit_batches(ids, HitKind::kFollowup);
  const auto s0 = svc.submit_followups(hits[0].hit_id, "w", good_entries());
  const auto s1 = svc.submit_followups(hits[1].hit_id, "w", good_entries());
  const auto s2 = svc.submit_followups(hits[2].hit_id, "w", good_entries());
  EXPECT_EQ(svc.review_queue().size(), 3u);

  svc.review_submission("rev", s0, Decision::kReject, "too vague");
  auto sub = svc.snapshot().submissions.at(s0);
  EXPECT_EQ(sub.state, ReviewState::kRejected);
  EXPECT_EQ(sub.feedback, "too vague");
  EXPECT_EQ(svc.annotator("w").rejected, 1);
  EXPECT_THROW(svc.review_submission("rev", s0, Decision::kApprove, ""), tvcp::StateError);
  EXPECT_THROW(svc.review_submission("rev", "sub-999", Decision::kApprove, ""), tvcp::NotFoundError);

  auto edited = good_entries();
  edited[0].text = "the trip got cut short by rain";
  auto broken = edited;
  broken[0].updated = D::k1To3Days;
  EXPECT_THROW(svc.review_submission("rev", s1, Decision::kEdit, "", broken), tvcp::ValidationError);
  svc.review_submission("rev", s1, Decision::kEdit, "fixed wording", edited);
  EXPECT_EQ(svc.snapshot().submissions.at(s1).entries[0].text, "the trip got cut short by rain");
  EXPECT_EQ(svc.annotator("w").approved, 1);

  svc.block_annotator("w", "rev");
  EXPECT_FALSE(svc.annotator("w").trusted());
  EXPECT_THROW(svc.next_hit(HitKind::kFollowup, "w"), tvcp::StateError);
  EXPECT_EQ(svc.review_queue().size(), 1u);
  (void)s2;
}

TEST(Export, ApprovedOnlyAndStrictValid) {
  const auto dir = temp_dir("tvcp_ann_export");
  AnnotationService svc({}, fixed_clock());
  const auto ids = accepted_targets(svc, 3);
  const auto hits = svc.create_hit_batches(ids, HitKind::kFollowup);
  const auto s0 = svc.submit_followups(hits[0].hit_id, "w", good_entries());
  const auto s1 = svc.submit_followups(hits[1].hit_id, "w", good_entries());
  svc.submit_followups(hits[2].hit_id, "w", good_entries());  // stays pending
  svc.review_submission("rev", s0, Decision::kApprove, "");
  svc.review_submission("rev", s1, Decision::kReject, "no");

  const auto r = svc.export_dataset(dir);
  ASSERT_EQ(r.samples.size(), 3u);
  for (const auto& s : r.samples) EXPECT_EQ(s.target_id, "st0");
  EXPECT_EQ(r.manifest["accepted_targets"], 3);
  EXPECT_EQ(r.manifest["targets_exported"], 1);
  EXPECT_EQ(r.manifest["targets_without_approved_followups"], 2);
  EXPECT_EQ(r.manifest["samples"], 3);
  EXPECT_EQ(r.manifest["submissions"]["rejected"], 1);
  const auto loaded = load_and_validate(dir / "dataset.jsonl", ValidationMode::kStrict);
  EXPECT_EQ(loaded.samples.size(), 3u);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST(EventLog, ReplayReproducesState) {
  const auto dir = temp_dir("tvcp_ann_log");
  const auto log = dir / "events.jsonl";
  nlohmann::ordered_json live;
  {
    AnnotationService svc(log, fixed_clock());
    const auto ids = accepted_targets(svc, 12);
    svc.add_statement("odd", "disputed statement");
    const auto h = svc.create_hit_batches({"odd"}, HitKind::kDuration).front();
    svc.submit_duration_votes(h.hit_id, "p", {{"odd", Vote::of(D::k2To6h)}});
    svc.submit_duration_votes(h.hit_id, "q", {{"odd", Vote::of(D::k3To7Days)}});
    svc.set_qualified("w", true);
    const auto hits = svc.create_hit_batches({ids[0], ids[1]}, HitKind::kFollowup);
    const auto s = svc.submit_followups(hits[0].hit_id, "w", good_entries());
    svc.review_submission("rev", s, Decision::kApprove, "ok");
    svc.submit_followups(hits[1].hit_id, "w", good_entries());
    svc.block_annotator("spammer", "rev");
    live = to_json(svc.snapshot());
    EXPECT_EQ(to_json(fold_events(svc.events())), live);
  }
  AnnotationService reopened(log, fixed_clock());
  EXPECT_EQ(to_json(reopened.snapshot()), live);
  EXPECT_TRUE(reopened.annotator("w").qualified);

  auto events = reopened.events();
  events.erase(events.begin() + 3);
  EXPECT_THROW(fold_events(events), tvcp::StateError);
  fs::remove_all(dir);
}

TEST(Chunk, Sizes) {
  std::vector<std::string> ids(23, "x");
  const auto c = chunk(ids, 10);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[2].size(), 3u);
  EXPECT_TRUE(chunk({}, 10).empty());
}

// --- REST -------------------------------------------------------------------

class Rest : public ::testing::Test {
 protected:
  void SetUp() override {
    register_routes(server_, svc_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    server_.stop();
    thread_.join();
  }
  std::pair<int, json> post(const std::string& path, const json& body) {
    auto r = client_->Post(path, body.dump(), "application/json");
    return {r->status, r->body.empty() ? json() : json::parse(r->body)};
  }
  std::pair<int, json> get(const std::string& path) {
    auto r = client_->Get(path);
    return {r->status, r->body.empty() ? json() : json::parse(r->body)};
  }

  AnnotationService svc_{std::nullopt, fixed_clock()};
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(Rest, FullWorkflow) {
  auto [st, body] = post("/statements", {{"statements", {{{"id", "t1"}, {"text", "off to the beach"}},
                                                         {{"id", "t2"}, {"text", "doing homework"}}}}});
  ASSERT_EQ(st, 200);
  EXPECT_EQ(body["added"], 2);
  std::tie(st, body) = post("/hits", {{"statement_ids", {"t1", "t2"}}, {"kind", "duration"}});
  ASSERT_EQ(st, 200);
  ASSERT_EQ(body["hits"].size(), 1u);

  std::tie(st, body) = get("/hits/next?task=duration&annotator=a");
  ASSERT_EQ(st, 200);
  const std::string hit = body["hit_id"];
  EXPECT_EQ(body["statements"].size(), 2u);

  std::tie(st, body) = post("/hits/" + hit + "/votes", {{"annotator_id", "a"}, {"votes", {{"t1", "2h_6h"}, {"t2", "2h_6h"}}}});
  EXPECT_EQ(st, 200);
  std::tie(st, body) = post("/hits/" + hit + "/votes", {{"annotator_id", "a"}, {"votes", {{"t1", "2h_6h"}, {"t2", "2h_6h"}}}});
  EXPECT_EQ(st, 409);
  std::tie(st, body) = post("/hits/" + hit + "/votes", {{"annotator_id", "b"}, {"votes", {{"t1", "2h_6h"}, {"t2", "soonish"}}}});
  EXPECT_EQ(st, 400);
  std::tie(st, body) = post("/hits/" + hit + "/votes", {{"annotator_id", "b"}, {"votes", {{"t1", "2h_6h"}, {"t2", "stationary"}}}});
  EXPECT_EQ(st, 200);
  EXPECT_EQ(body["hit"]["status"], "submitted");
  std::tie(st, body) = post("/hits/" + hit + "/votes", {{"annotator_id", "c"}, {"votes", {{"t1", "2h_6h"}, {"t2", "2h_6h"}}}});
  EXPECT_EQ(st, 409);

  std::tie(st, body) = post("/hits", {{"statement_ids", {"t1"}}, {"kind", "followup"}});
  ASSERT_EQ(st, 200);
  std::tie(st, body) = get("/hits/next?task=followup&annotator=w");
  ASSERT_EQ(st, 200);
  const std::string fhit = body["hit_id"];
  EXPECT_EQ(body["statements"][0]["duration"], "2h_6h");

  const json bad_entries = {{{"label", "DEC"}, {"text", "cut short"}, {"updated", "15m_45m"}},
                            {{"label", "UNC"}, {"text", "nice"}, {"updated", "1d_3d"}},
                            {{"label", "INC"}, {"text", "stay longer"}, {"updated", "1d_3d"}}};
  std::tie(st, body) = post("/hits/" + fhit + "/followups", {{"annotator_id", "w"}, {"entries", bad_entries}});
  EXPECT_EQ(st, 400);
  ASSERT_EQ(body["details"].size(), 1u);
  EXPECT_NE(body["details"][0].get<std::string>().find("label/duration mismatch"), std::string::npos);

  json entries = bad_entries;
  entries[1]["updated"] = "2h_6h";
  std::tie(st, body) = post("/hits/" + fhit + "/followups", {{"annotator_id", "w"}, {"entries", entries}});
  ASSERT_EQ(st, 200);
  const std::string sid = body["submission_id"];
  EXPECT_TRUE(body["queued"].get<bool>());

  std::tie(st, body) = get("/review/queue");
  ASSERT_EQ(st, 200);
  ASSERT_EQ(body["queue"].size(), 1u);
  EXPECT_EQ(body["queue"][0]["annotator"]["approved"], 0);

  std::tie(st, body) = post("/review/" + sid, {{"reviewer_id", "r"}, {"decision", "approve"}, {"feedback", "good"}});
  EXPECT_EQ(st, 200);
  EXPECT_EQ(body["state"], "approved");
  std::tie(st, body) = post("/review/" + sid, {{"reviewer_id", "r"}, {"decision", "approve"}});
  EXPECT_EQ(st, 409);

  std::tie(st, body) = get("/annotators/w");
  EXPECT_EQ(body["approved"], 1);
  std::tie(st, body) = post("/annotators/w/qualify", {{"qualified", true}});
  EXPECT_EQ(body["qualified"], true);
  std::tie(st, body) = post("/annotators/w/block", {{"reviewer_id", "r"}});
  EXPECT_EQ(body["blocked"], true);
  std::tie(st, body) = get("/hits/next?task=followup&annotator=w");
  EXPECT_EQ(st, 409);

  std::tie(st, body) = get("/export");
  ASSERT_EQ(st, 200);
  EXPECT_EQ(body["samples"].size(), 3u);
  EXPECT_EQ(body["manifest"]["discarded"]["stationary"], 0);
  EXPECT_EQ(body["manifest"]["pending_targets"], 1);
}

TEST_F(Rest, ErrorCodes) {
  EXPECT_EQ(get("/hits/hit-424242").first, 404);
  EXPECT_EQ(get("/hits/next?task=duration&annotator=a").first, 404);
  EXPECT_EQ(get("/hits/next?task=duration").first, 400);
  EXPECT_EQ(get("/hits/next?task=painting&annotator=a").first, 400);
  EXPECT_EQ(post("/review/sub-000009", {{"reviewer_id", "r"}, {"decision", "approve"}}).first, 404);
  EXPECT_EQ(post("/hits", {{"statement_ids", {"ghost"}}, {"kind", "duration"}}).first, 404);
  auto r = client_->Post("/statements", "{not json", "application/json");
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(post("/statements", {{"statements", {{{"id", "x"}}}}}).first, 400);
  EXPECT_EQ(post("/statements", {{"statements", {{{"id", "x"}, {"text", "a b"}}}}}).first, 200);
  EXPECT_EQ(post("/statements", {{"statements", {{{"id", "x"}, {"text", "a b"}}}}}).first, 409);
}

TEST_F(Rest, ConcurrentReadsDuringWrites) {
  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    httplib::Client c("127.0.0.1", port_);
    while (!stop) {
      auto r = c.Get("/export");
      if (!r || r->status != 200) ++bad;
    }
  });
  for (int i = 0; i < 40; ++i)
    ASSERT_EQ(post("/statements", {{"statements", {{{"id", "c" + std::to_string(i)}, {"text", "text here"}}}}}).first, 200);
  stop = true;
  reader.join();
  EXPECT_EQ(bad, 0);
  EXPECT_EQ(svc_.snapshot().statements.size(), 40u);
}
