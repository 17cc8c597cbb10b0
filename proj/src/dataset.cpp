#include "tvcp/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include "tvcp/error.hpp"
#include "tvcp/rng.hpp"
#include "tvcp/util.hpp"

namespace tvcp {

using json = nlohmann::ordered_json;

Vote parse_vote(std::string_view token) {
  if (token == kStationaryToken) return Vote::stationary();
  return Vote::of(parse_duration(token));
}

std::string_view to_string(const Vote& v) noexcept {
  return v.is_stationary() ? kStationaryToken : token_of(*v.duration);
}

std::string_view to_string(TargetStatus s) noexcept {
  switch (s) {
    case TargetStatus::kPending: return "pending";
    case TargetStatus::kAccepted: return "accepted";
    case TargetStatus::kDiscarded: return "discarded";
  }
  return "?";
}

bool is_accepted_target_duration(DurationClass c) noexcept {
  return c != DurationClass::kUnder1Min && c != DurationClass::kOver1Month;
}

// --- serialization ----------------------------------------------------------

namespace {

const std::set<std::string> kSampleFields = {"sample_id",    "target_id",  "target_text", "followup_text",
                                             "tvd_original", "tvd_updated", "label"};

std::string require_string(const json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  if (!it->is_string()) throw ParseError(line, std::string("field '") + key + "' is not a string");
  return it->get<std::string>();
}

}  // namespace

json to_json(const Sample& s) {
  json j;
  j["sample_id"] = s.sample_id;
  j["target_id"] = s.target_id;
  j["target_text"] = s.target_text;
  j["followup_text"] = s.followup_text;
  j["tvd_original"] = std::string(token_of(s.original));
  j["tvd_updated"] = std::string(token_of(s.updated));
  j["label"] = std::string(to_string(s.label));
  for (const auto& [k, v] : s.extra.items()) j[k] = v;
  return j;
}

std::string to_jsonl(const std::vector<Sample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += to_json(s).dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  write_file(path, to_jsonl(samples));
}

LoadResult parse_and_validate(std::string_view jsonl, ValidationMode mode) {
  LoadResult result;
  std::vector<std::size_t> lines;
  std::vector<std::string> bad_ids;

  auto report = [&](std::size_t line, const std::string& sid, const std::string& tid, std::string msg) {
    result.report.issues.push_back({line, sid, tid, std::move(msg)});
    bad_ids.push_back(sid.empty() ? tid : sid);
  };

  std::istringstream in{std::string(jsonl)};
  std::string raw;
  std::size_t line_no = 0;
  std::vector<Sample> parsed;
  std::unordered_map<std::string, std::size_t> seen_ids;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (is_blank(raw)) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "record is not an object");
    ++result.report.records_read;

    Sample s;
    s.sample_id = require_string(j, "sample_id", line_no);
    s.target_id = require_string(j, "target_id", line_no);
    s.target_text = require_string(j, "target_text", line_no);
    s.followup_text = require_string(j, "followup_text", line_no);
    const auto orig = require_string(j, "tvd_original", line_no);
    const auto upd = require_string(j, "tvd_updated", line_no);
    const auto label = require_string(j, "label", line_no);
    for (const auto& [k, v] : j.items())
      if (!kSampleFields.count(k)) s.extra[k] = v;

    try {
      s.original = parse_duration(orig);
      s.updated = parse_duration(upd);
      s.label = parse_tvcp_label(label);
    } catch (const SchemaError& e) {
      report(line_no, s.sample_id, s.target_id, e.what());
      continue;
    }
    if (is_blank(s.target_text) || is_blank(s.followup_text)) {
      report(line_no, s.sample_id, s.target_id, "empty text");
      continue;
    }
    if (s.label != derive_tvcp_label(s.original, s.updated)) {
      report(line_no, s.sample_id, s.target_id, "label inconsistent");
      continue;
    }
    if (!is_accepted_target_duration(s.original)) {
      report(line_no, s.sample_id, s.target_id, "original duration outside accepted range");
      continue;
    }
    if (auto [it, fresh] = seen_ids.emplace(s.sample_id, line_no); !fresh) {
      report(line_no, s.sample_id, s.target_id, "duplicate sample id");
      continue;
    }
    parsed.push_back(std::move(s));
    lines.push_back(line_no);
  }

  // Group rule: exactly one sample per label for every target, one target text
  // and one original duration per target.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < parsed.size(); ++i) groups[parsed[i].target_id].push_back(i);
  std::vector<bool> keep(parsed.size(), true);
  for (const auto& [tid, idx] : groups) {
    std::string problem;
    if (idx.size() != 3) {
      problem = "incomplete group";
    } else {
      std::set<TvcpLabel> labels;
      for (auto i : idx) labels.insert(parsed[i].label);
      if (labels.size() != 3) problem = "duplicate label in group";
      for (auto i : idx) {
        if (parsed[i].original != parsed[idx[0]].original) problem = "original duration differs within group";
        if (parsed[i].target_text != parsed[idx[0]].target_text) problem = "target text differs within group";
      }
    }
    if (problem.empty()) continue;
    for (auto i : idx) {
      keep[i] = false;
      report(lines[i], parsed[i].sample_id, tid, problem);
    }
  }

  if (mode == ValidationMode::kStrict && !result.report.ok()) {
    std::string first = result.report.issues.front().message;
    throw ValidationError("dataset failed strict validation (" + first + ")", bad_ids);
  }
  for (std::size_t i = 0; i < parsed.size(); ++i)
    if (keep[i]) result.samples.push_back(std::move(parsed[i]));
  result.report.records_kept = result.samples.size();
  return result;
}

LoadResult load_and_validate(const std::filesystem::path& path, ValidationMode mode) {
  return parse_and_validate(read_file(path), mode);
}

// --- vote aggregation -------------------------------------------------------

std::string_view to_string(DiscardReason r) noexcept {
  switch (r) {
    case DiscardReason::kBoundary: return "boundary";
    case DiscardReason::kStationary: return "stationary";
    case DiscardReason::kNoMajority: return "no_majority";
  }
  return "?";
}

namespace {

AggregateOutcome resolve(const Vote& v) {
  if (v.is_stationary()) return AggregateOutcome::discarded(DiscardReason::kStationary);
  if (!is_accepted_target_duration(*v.duration)) return AggregateOutcome::discarded(DiscardReason::kBoundary);
  return AggregateOutcome::accepted(*v.duration);
}

}  // namespace

AggregateOutcome aggregate_votes(const std::vector<Vote>& votes) {
  if (votes.size() < 2 || votes.size() > 3)
    throw ContractError("aggregate_votes expects 2 or 3 votes, got " + std::to_string(votes.size()));
  if (votes.size() == 2) {
    if (votes[0] == votes[1]) return resolve(votes[0]);
    return AggregateOutcome::needs_third_vote();
  }
  if (votes[0] == votes[1] || votes[0] == votes[2]) return resolve(votes[0]);
  if (votes[1] == votes[2]) return resolve(votes[1]);
  return AggregateOutcome::discarded(DiscardReason::kNoMajority);
}

// --- splits -----------------------------------------------------------------

std::string_view to_string(Subset s) noexcept {
  switch (s) {
    case Subset::kTrain: return "train";
    case Subset::kVal: return "val";
    case Subset::kTest: return "test";
  }
  return "?";
}

std::vector<std::string> FoldAssignment::ids(Subset s) const {
  std::vector<std::string> out;
  for (const auto& [id, sub] : by_target)
    if (sub == s) out.push_back(id);
  return out;
}

std::size_t FoldAssignment::count(Subset s) const {
  return static_cast<std::size_t>(
      std::count_if(by_target.begin(), by_target.end(), [s](const auto& kv) { return kv.second == s; }));
}

std::vector<std::string> target_ids(const std::vector<Sample>& samples) {
  std::set<std::string> ids;
  for (const auto& s : samples) ids.insert(s.target_id);
  return {ids.begin(), ids.end()};
}

namespace {

std::size_t val_count(std::size_t rest, double train_fraction, double val_fraction) {
  if (rest < 2) return 0;
  auto n = static_cast<std::size_t>(std::llround(static_cast<double>(rest) * val_fraction /
                                                 (train_fraction + val_fraction)));
  return std::clamp<std::size_t>(n, 1, rest - 1);
}

}  // namespace

SplitPlan split_grouped_kfold(const std::vector<Sample>& samples, int folds, std::uint64_t seed) {
  if (folds < 2) throw ContractError("fold count must be at least 2");
  auto ids = target_ids(samples);
  if (ids.size() < static_cast<std::size_t>(folds))
    throw ContractError("fewer targets (" + std::to_string(ids.size()) + ") than folds (" +
                        std::to_string(folds) + ")");
  Rng rng(seed);
  rng.shuffle(ids);

  SplitPlan plan;
  plan.seed = seed;
  const std::size_t n = ids.size();
  const auto f_count = static_cast<std::size_t>(folds);
  for (std::size_t f = 0; f < f_count; ++f) {
    const std::size_t test_begin = n * f / f_count, test_end = n * (f + 1) / f_count;
    std::vector<std::string> rest;
    FoldAssignment fa;
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= test_begin && i < test_end)
        fa.by_target[ids[i]] = Subset::kTest;
      else
        rest.push_back(ids[i]);
    }
    const std::size_t n_val = val_count(rest.size(), plan.train_fraction, plan.val_fraction);
    for (std::size_t i = 0; i < rest.size(); ++i) fa.by_target[rest[i]] = i < n_val ? Subset::kVal : Subset::kTrain;
    plan.folds.push_back(std::move(fa));
  }
  return plan;
}

SplitPlan split_holdout(const std::vector<Sample>& samples, double train_fraction, double val_fraction,
                        std::uint64_t seed) {
  if (train_fraction <= 0 || val_fraction <= 0 || train_fraction + val_fraction >= 1)
    throw ContractError("holdout fractions must be positive and leave room for a test subset");
  auto ids = target_ids(samples);
  if (ids.size() < 3) throw ContractError("holdout split needs at least 3 targets");
  Rng rng(seed);
  rng.shuffle(ids);
  const std::size_t n = ids.size();
  auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 2);
  n_val = std::clamp<std::size_t>(n_val, 1, n - n_train - 1);

  SplitPlan plan;
  plan.seed = seed;
  plan.train_fraction = train_fraction;
  plan.val_fraction = val_fraction;
  plan.test_fraction = 1.0 - train_fraction - val_fraction;
  FoldAssignment fa;
  for (std::size_t i = 0; i < n; ++i)
    fa.by_target[ids[i]] = i < n_train ? Subset::kTrain : (i < n_train + n_val ? Subset::kVal : Subset::kTest);
  plan.folds.push_back(std::move(fa));
  return plan;
}

SplitPlan subsample_training_fraction(const SplitPlan& plan, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ContractError("fraction must lie in (0, 1]");
  SplitPlan out = plan;
  for (std::size_t f = 0; f < out.folds.size(); ++f) {
    auto train = out.folds[f].ids(Subset::kTrain);
    Rng rng(mix_seed(seed, f));
    rng.shuffle(train);
    // 1e-9 absorbs representation error, e.g. 0.1 * 70 = 7.000000000000001.
    const auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(train.size()) - 1e-9));
    for (std::size_t i = keep; i < train.size(); ++i) out.folds[f].by_target.erase(train[i]);
  }
  return out;
}

std::vector<Sample> select(const std::vector<Sample>& samples, const FoldAssignment& fold, Subset s) {
  std::vector<Sample> out;
  for (const auto& smp : samples) {
    auto it = fold.by_target.find(smp.target_id);
    if (it != fold.by_target.end() && it->second == s) out.push_back(smp);
  }
  return out;
}

json to_json(const SplitPlan& plan) {
  json j;
  j["seed"] = plan.seed;
  j["fractions"] = {plan.train_fraction, plan.val_fraction, plan.test_fraction};
  json folds = json::array();
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    json jf;
    jf["fold"] = f;
    for (Subset s : {Subset::kTrain, Subset::kVal, Subset::kTest})
      jf[std::string(to_string(s))] = plan.folds[f].ids(s);
    folds.push_back(std::move(jf));
  }
  j["folds"] = std::move(folds);
  return j;
}

SplitPlan split_plan_from_json(const json& j) {
  SplitPlan plan;
  try {
    plan.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("fractions")) {
      const auto& fr = j.at("fractions");
      plan.train_fraction = fr.at(0).get<double>();
      plan.val_fraction = fr.at(1).get<double>();
      plan.test_fraction = fr.at(2).get<double>();
    }
    for (const auto& jf : j.at("folds")) {
      FoldAssignment fa;
      for (Subset s : {Subset::kTrain, Subset::kVal, Subset::kTest}) {
        for (const auto& id : jf.at(std::string(to_string(s)))) {
          auto [it, fresh] = fa.by_target.emplace(id.get<std::string>(), s);
          if (!fresh) throw ConfigError("target '" + it->first + "' assigned twice in one fold");
        }
      }
      plan.folds.push_back(std::move(fa));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed split plan: ") + e.what());
  }
  return plan;
}

void save_split_plan(const std::filesystem::path& path, const SplitPlan& plan) {
  write_file(path, to_json(plan).dump(2) + "\n");
}

SplitPlan load_split_plan(const std::filesystem::path& path) {
  try {
    return split_plan_from_json(json::parse(read_file(path)));
  } catch (const json::parse_error& e) {
    throw ConfigError("split plan '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::map<int, std::size_t> delta_distribution(const std::vector<Sample>& samples) {
  std::map<int, std::size_t> hist;
  for (const auto& s : samples) ++hist[s.delta()];
  return hist;
}

}  // namespace tvcp
