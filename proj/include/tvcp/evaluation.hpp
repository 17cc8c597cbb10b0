#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tvcp/dataset.hpp"
#include "tvcp/schema.hpp"

namespace tvcp {

struct Prediction {
  std::string sample_id;
  std::string target_id;
  std::optional<TvcpLabel> predicted;  // nullopt: no usable prediction, scored incorrect
  TvcpLabel gold = TvcpLabel::kUnc;
  std::optional<DurationClass> original;
  std::optional<DurationClass> updated;
  std::optional<double> predicted_original;
  std::optional<double> predicted_updated;

  bool correct() const noexcept { return predicted && *predicted == gold; }
};

Prediction make_prediction(const Sample& s, std::optional<TvcpLabel> predicted);

nlohmann::ordered_json to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::ordered_json& j);
void save_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

struct DeltaBucket {
  std::size_t count = 0;
  std::size_t correct = 0;
  double accuracy() const noexcept { return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0; }
};

struct EvalReport {
  double accuracy = 0.0;
  double exact_match = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_targets = 0;
  std::size_t n_unparsed = 0;
  std::map<int, DeltaBucket> per_delta;  // empty unless every prediction carries durations
};

// Accuracy over samples; EM over targets (all members correct).
EvalReport compute_metrics(const std::vector<Prediction>& preds);

// Aligned-by-id form. Every id in either map must be present in the other and
// in the grouping, otherwise ContractError.
EvalReport compute_metrics(const std::map<std::string, std::optional<TvcpLabel>>& predicted,
                           const std::map<std::string, TvcpLabel>& gold,
                           const std::map<std::string, std::string>& target_of);

// Buckets by signed change delta. Throws ContractError when a prediction lacks durations.
std::map<int, DeltaBucket> per_delta_accuracy(const std::vector<Prediction>& preds);

struct TargetOutcome {
  std::string target_id;
  std::size_t correct = 0;
  std::size_t total = 0;
  bool exact() const noexcept { return total > 0 && correct == total; }
};

std::vector<TargetOutcome> target_outcomes(const std::vector<Prediction>& preds);  // sorted by id

enum class Metric { kAccuracy, kExactMatch };
std::string_view to_string(Metric m) noexcept;
Metric parse_metric(std::string_view s);

struct BootstrapConfig {
  Metric metric = Metric::kExactMatch;
  int resamples = 10000;
  std::uint64_t seed = 0;
  bool add_one = false;  // p = (k + 1) / (n + 1)
  unsigned threads = 0;
};

struct BootstrapResult {
  Metric metric = Metric::kExactMatch;
  double observed_difference = 0.0;  // metric(B) - metric(A) on the full set
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int resamples = 0;
};

// Resamples targets with replacement; p = share of resamples where B does not
// beat A. The target id sets of A and B must be identical.
BootstrapResult paired_bootstrap(const std::vector<TargetOutcome>& a, const std::vector<TargetOutcome>& b,
                                 const BootstrapConfig& config);

nlohmann::ordered_json to_json(const EvalReport& r);
nlohmann::ordered_json to_json(const BootstrapResult& r);
std::string per_delta_csv(const std::map<int, DeltaBucket>& buckets);

// metrics.json + per_delta.csv; contents depend only on the predictions.
void write_eval_report(const std::filesystem::path& dir, const EvalReport& r);

}  // namespace tvcp
