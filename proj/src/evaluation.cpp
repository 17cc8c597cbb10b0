#include "tvcp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

#include "tvcp/error.hpp"
#include "tvcp/rng.hpp"
#include "tvcp/util.hpp"

namespace tvcp {

using json = nlohmann::ordered_json;

Prediction make_prediction(const Sample& s, std::optional<TvcpLabel> predicted) {
  Prediction p;
  p.sample_id = s.sample_id;
  p.target_id = s.target_id;
  p.predicted = predicted;
  p.gold = s.label;
  p.original = s.original;
  p.updated = s.updated;
  return p;
}

json to_json(const Prediction& p) {
  json j;
  j["sample_id"] = p.sample_id;
  j["target_id"] = p.target_id;
  j["predicted"] = p.predicted ? json(std::string(to_string(*p.predicted))) : json(nullptr);
  j["gold"] = std::string(to_string(p.gold));
  if (p.original) j["tvd_original"] = std::string(token_of(*p.original));
  if (p.updated) j["tvd_updated"] = std::string(token_of(*p.updated));
  if (p.predicted_original) j["predicted_original"] = *p.predicted_original;
  if (p.predicted_updated) j["predicted_updated"] = *p.predicted_updated;
  return j;
}

Prediction prediction_from_json(const json& j) {
  Prediction p;
  try {
    p.sample_id = j.at("sample_id").get<std::string>();
    p.target_id = j.at("target_id").get<std::string>();
    if (j.contains("predicted") && !j.at("predicted").is_null())
      p.predicted = parse_tvcp_label(j.at("predicted").get<std::string>());
    p.gold = parse_tvcp_label(j.at("gold").get<std::string>());
    if (j.contains("tvd_original")) p.original = parse_duration(j.at("tvd_original").get<std::string>());
    if (j.contains("tvd_updated")) p.updated = parse_duration(j.at("tvd_updated").get<std::string>());
    if (j.contains("predicted_original")) p.predicted_original = j.at("predicted_original").get<double>();
    if (j.contains("predicted_updated")) p.predicted_updated = j.at("predicted_updated").get<double>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed prediction record: ") + e.what());
  }
  return p;
}

void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds) {
  std::string out;
  for (const auto& p : preds) out += to_json(p).dump() + "\n";
  write_file(path, out);
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Prediction> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(n, e.what());
    }
    out.push_back(prediction_from_json(j));
  }
  return out;
}

// --- metrics ----------------------------------------------------------------

EvalReport compute_metrics(const std::vector<Prediction>& preds) {
  EvalReport r;
  r.n_samples = preds.size();
  std::size_t correct = 0;
  std::map<std::string, bool> all_correct;
  bool durations = !preds.empty();
  for (const auto& p : preds) {
    if (p.correct()) ++correct;
    if (!p.predicted) ++r.n_unparsed;
    auto [it, fresh] = all_correct.try_emplace(p.target_id, true);
    it->second = it->second && p.correct();
    durations = durations && p.original && p.updated;
  }
  r.n_targets = all_correct.size();
  if (r.n_samples) r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_samples);
  if (r.n_targets) {
    const auto exact = std::count_if(all_correct.begin(), all_correct.end(), [](const auto& kv) { return kv.second; });
    r.exact_match = static_cast<double>(exact) / static_cast<double>(r.n_targets);
  }
  if (durations) r.per_delta = per_delta_accuracy(preds);
  return r;
}

EvalReport compute_metrics(const std::map<std::string, std::optional<TvcpLabel>>& predicted,
                           const std::map<std::string, TvcpLabel>& gold,
                           const std::map<std::string, std::string>& target_of) {
  std::vector<std::string> unmatched;
  for (const auto& [id, _] : predicted)
    if (!gold.count(id) || !target_of.count(id)) unmatched.push_back(id);
  for (const auto& [id, _] : gold)
    if (!predicted.count(id)) unmatched.push_back(id);
  if (!unmatched.empty()) {
    std::string msg = "unmatched sample ids:";
    for (std::size_t i = 0; i < unmatched.size() && i < 20; ++i) msg += " " + unmatched[i];
    throw ContractError(msg);
  }
  std::vector<Prediction> preds;
  preds.reserve(predicted.size());
  for (const auto& [id, label] : predicted) {
    Prediction p;
    p.sample_id = id;
    p.target_id = target_of.at(id);
    p.predicted = label;
    p.gold = gold.at(id);
    preds.push_back(std::move(p));
  }
  return compute_metrics(preds);
}

std::map<int, DeltaBucket> per_delta_accuracy(const std::vector<Prediction>& preds) {
  std::map<int, DeltaBucket> out;
  for (const auto& p : preds) {
    if (!p.original || !p.updated)
      throw ContractError("prediction '" + p.sample_id + "' lacks duration fields for the delta breakdown");
    auto& b = out[change_delta(*p.original, *p.updated)];
    ++b.count;
    if (p.correct()) ++b.correct;
  }
  return out;
}

std::vector<TargetOutcome> target_outcomes(const std::vector<Prediction>& preds) {
  std::map<std::string, TargetOutcome> by;
  for (const auto& p : preds) {
    auto& t = by[p.target_id];
    t.target_id = p.target_id;
    ++t.total;
    if (p.correct()) ++t.correct;
  }
  std::vector<TargetOutcome> out;
  out.reserve(by.size());
  for (auto& [_, t] : by) out.push_back(std::move(t));
  return out;
}

std::string_view to_string(Metric m) noexcept { return m == Metric::kAccuracy ? "accuracy" : "em"; }

Metric parse_metric(std::string_view s) {
  if (s == "accuracy" || s == "acc") return Metric::kAccuracy;
  if (s == "em" || s == "exact_match") return Metric::kExactMatch;
  throw ConfigError("unknown metric '" + std::string(s) + "' (expected accuracy or em)");
}

// --- bootstrap --------------------------------------------------------------

namespace {

struct Tally {
  long long correct = 0;
  long long total = 0;
  long long exact = 0;
  long long targets = 0;
};

// Sign of metric(b) - metric(a) computed exactly on integer tallies.
int compare(Metric m, const Tally& a, const Tally& b) {
  long long lhs, rhs;
  if (m == Metric::kExactMatch) {
    lhs = b.exact * a.targets;
    rhs = a.exact * b.targets;
  } else {
    lhs = b.correct * a.total;
    rhs = a.correct * b.total;
  }
  return (lhs > rhs) - (lhs < rhs);
}

double value(Metric m, const Tally& t) {
  if (m == Metric::kExactMatch) return t.targets ? static_cast<double>(t.exact) / static_cast<double>(t.targets) : 0.0;
  return t.total ? static_cast<double>(t.correct) / static_cast<double>(t.total) : 0.0;
}

double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapResult paired_bootstrap(const std::vector<TargetOutcome>& a, const std::vector<TargetOutcome>& b,
                                 const BootstrapConfig& config) {
  if (config.resamples < 1) throw ContractError("bootstrap needs at least one resample");
  std::map<std::string, const TargetOutcome*> ia, ib;
  for (const auto& t : a) ia[t.target_id] = &t;
  for (const auto& t : b) ib[t.target_id] = &t;
  if (ia.size() != a.size() || ib.size() != b.size()) throw ContractError("duplicate target ids in bootstrap input");
  if (ia.size() != ib.size() ||
      !std::equal(ia.begin(), ia.end(), ib.begin(), [](const auto& x, const auto& y) { return x.first == y.first; }))
    throw ContractError("bootstrap inputs cover different target id sets");
  if (ia.empty()) throw ContractError("bootstrap inputs are empty");

  // Canonical order by outcome content, not by id: targets with equal paired
  // outcomes are interchangeable, so the result depends neither on input
  // order nor on how targets are named.
  const std::size_t n = ia.size();
  std::vector<std::pair<const TargetOutcome*, const TargetOutcome*>> pairs;
  for (const auto& [id, t] : ia) pairs.emplace_back(t, ib.at(id));
  auto key = [](const auto& p) { return std::tuple(p.first->correct, p.first->total, p.second->correct, p.second->total); };
  std::stable_sort(pairs.begin(), pairs.end(), [&](const auto& x, const auto& y) { return key(x) < key(y); });
  std::vector<const TargetOutcome*> ta, tb;
  for (const auto& [x, y] : pairs) ta.push_back(x), tb.push_back(y);

  auto tally_of = [&](const std::vector<const TargetOutcome*>& v, const std::vector<std::uint32_t>* idx) {
    Tally t;
    for (std::size_t k = 0; k < n; ++k) {
      const auto* o = v[idx ? (*idx)[k] : k];
      t.correct += static_cast<long long>(o->correct);
      t.total += static_cast<long long>(o->total);
      t.exact += o->exact() ? 1 : 0;
      ++t.targets;
    }
    return t;
  };

  BootstrapResult r;
  r.metric = config.metric;
  r.resamples = config.resamples;
  r.observed_difference = value(config.metric, tally_of(tb, nullptr)) - value(config.metric, tally_of(ta, nullptr));

  const auto count = static_cast<std::size_t>(config.resamples);
  std::vector<double> diffs(count);
  std::vector<char> not_better(count);
  parallel_for(
      count,
      [&](std::size_t i) {
        Rng rng(mix_seed(config.seed, i));
        std::vector<std::uint32_t> idx(n);
        for (auto& x : idx) x = static_cast<std::uint32_t>(rng.uniform_index(n));
        const Tally sa = tally_of(ta, &idx), sb = tally_of(tb, &idx);
        diffs[i] = value(config.metric, sb) - value(config.metric, sa);
        not_better[i] = compare(config.metric, sa, sb) <= 0;
      },
      config.threads);

  const auto k = static_cast<double>(std::count(not_better.begin(), not_better.end(), 1));
  const auto total = static_cast<double>(count);
  r.p_value = config.add_one ? (k + 1.0) / (total + 1.0) : k / total;
  std::sort(diffs.begin(), diffs.end());
  r.ci_low = percentile(diffs, 0.025);
  r.ci_high = percentile(diffs, 0.975);
  return r;
}

// --- reports ----------------------------------------------------------------

json to_json(const EvalReport& r) {
  json j;
  j["accuracy"] = r.accuracy;
  j["exact_match"] = r.exact_match;
  j["n_samples"] = r.n_samples;
  j["n_targets"] = r.n_targets;
  j["n_unparsed"] = r.n_unparsed;
  json pd = json::array();
  for (const auto& [d, b] : r.per_delta) pd.push_back({{"delta", d}, {"count", b.count}, {"accuracy", b.accuracy()}});
  j["per_delta"] = pd;
  return j;
}

json to_json(const BootstrapResult& r) {
  json j;
  j["metric"] = std::string(to_string(r.metric));
  j["observed_difference"] = r.observed_difference;
  j["p_value"] = r.p_value;
  j["ci_low"] = r.ci_low;
  j["ci_high"] = r.ci_high;
  j["resamples"] = r.resamples;
  return j;
}

std::string per_delta_csv(const std::map<int, DeltaBucket>& buckets) {
  std::string out = "delta,count,accuracy\n";
  char buf[96];
  for (const auto& [d, b] : buckets) {
    std::snprintf(buf, sizeof buf, "%d,%zu,%.6f\n", d, b.count, b.accuracy());
    out += buf;
  }
  return out;
}

void write_eval_report(const std::filesystem::path& dir, const EvalReport& r) {
  write_file(dir / "metrics.json", to_json(r).dump(2) + "\n");
  write_file(dir / "per_delta.csv", per_delta_csv(r.per_delta));
}

}  // namespace tvcp
