#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tvcp/dataset.hpp"
#include "tvcp/evaluation.hpp"
#include "tvcp/models.hpp"
#include "tvcp/nn/adamw.hpp"

namespace tvcp {

struct TrainConfig {
  ModelConfig model;
  double learning_rate = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int patience = 5;
  int max_epochs = 50;
  int batch_size = 32;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency; results do not depend on it

  void validate() const;
  nn::AdamWConfig optimizer() const;
};

// Hyperparameter rows for the five model families (dropout, learning rate, frozen embeddings).
std::vector<std::string> preset_names();
TrainConfig preset(std::string_view name, TrainConfig base = {});

nlohmann::ordered_json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::ordered_json& j, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});

// Stops after `patience` consecutive epochs without a strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  // Returns true when the value is a new best.
  bool observe(double value);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  int best_epoch() const noexcept { return best_epoch_; }  // 1-based, 0 before any observation
  double best() const noexcept { return best_; }
  int epochs() const noexcept { return epochs_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_ = 0.0;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown train;  // means over the epoch's samples
  double val_accuracy = 0.0;
  double val_em = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_em = 0.0;
  std::optional<std::filesystem::path> best_checkpoint;
  bool stopped_early = false;
  int epochs_run() const noexcept { return static_cast<int>(log.size()); }
};

nlohmann::ordered_json to_json(const TrainResult& r);

struct TrainOutput {
  TrainResult result;
  TvcpModel model;  // parameters from the best epoch
};

// With run_dir set, writes config.json, metrics.csv, best.ckpt and train_result.json.
TrainOutput train(const TrainConfig& config, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::optional<std::filesystem::path>& run_dir = std::nullopt);

std::vector<Prediction> predict_samples(const TvcpModel& model, const std::vector<Sample>& samples,
                                        unsigned threads = 0);
std::vector<Prediction> evaluate_split(const std::filesystem::path& checkpoint, const std::vector<Sample>& samples,
                                       unsigned threads = 0);

struct FoldResult {
  int fold = 0;
  TrainResult train;
  EvalReport test;
  std::vector<Prediction> predictions;
};

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  double mean_accuracy() const;
  double mean_em() const;
  std::vector<Prediction> all_predictions() const;
};

CrossValidationResult cross_validate(const TrainConfig& config, const std::vector<Sample>& samples,
                                     const SplitPlan& plan,
                                     const std::optional<std::filesystem::path>& run_root = std::nullopt);

// --- hyperparameter sweep ---------------------------------------------------

struct SweepGrid {
  std::vector<double> learning_rates;
  std::vector<double> dropouts;
  std::vector<bool> freeze;
  std::size_t size() const noexcept { return learning_rates.size() * dropouts.size() * freeze.size(); }
  static SweepGrid standard();  // {1e-2,1e-3,1e-4} x {0.1,0.25,0.5} x {frozen,unfrozen}
};

struct SweepRow {
  double learning_rate = 0.0;
  double dropout = 0.0;
  bool frozen = false;
  double val_em = 0.0;
  double test_accuracy = 0.0;
  double test_em = 0.0;
  int epochs_run = 0;
  int best_epoch = 0;
  std::optional<std::string> error;  // set when the cell failed
};

using CellRunner = std::function<TrainOutput(const TrainConfig&, const std::vector<Sample>& train_set,
                                             const std::vector<Sample>& val_set)>;

// One cell per grid point on a single 80/10/10 grouped split. Each returned
// model is scored on val and test here, so a collapsed model reports its real
// EM. Rows are sorted by val EM descending; failed cells sort last.
std::vector<SweepRow> sweep(const SweepGrid& grid, const std::vector<Sample>& samples, const TrainConfig& base,
                            std::uint64_t split_seed, const CellRunner& runner = {});

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace tvcp
