#include "tvcp/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tvcp/error.hpp"
#include "tvcp/rng.hpp"
#include "tvcp/util.hpp"

namespace tvcp {

using json = nlohmann::ordered_json;

namespace {

// Gradient shards per batch. Fixed so results do not depend on the thread count.
constexpr int kShards = 4;

struct PresetRow {
  const char* name;
  Archetype archetype;
  double dropout;
  double lr;
  bool frozen;
};

constexpr PresetRow kPresets[] = {
    {"tf-bert", Archetype::kTransformer, 0.25, 1e-4, false},
    {"s-bert", Archetype::kSiamese, 0.25, 1e-4, false},
    {"tf-roberta", Archetype::kTransformer, 0.25, 1e-3, true},
    {"s-roberta", Archetype::kSiamese, 0.10, 1e-4, true},
    {"selfexplain", Archetype::kSelfExplain, 0.00, 2e-5, false},
};

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (!(learning_rate > 0)) throw ContractError("learning rate must be positive");
  if (patience < 1) throw ContractError("patience must be >= 1");
  if (max_epochs < 1) throw ContractError("max epochs must be >= 1");
  if (batch_size < 1) throw ContractError("batch size must be >= 1");
  if (weight_decay < 0) throw ContractError("weight decay must be non-negative");
}

nn::AdamWConfig TrainConfig::optimizer() const { return {learning_rate, beta1, beta2, eps, weight_decay}; }

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : kPresets) out.emplace_back(p.name);
  return out;
}

TrainConfig preset(std::string_view name, TrainConfig base) {
  for (const auto& p : kPresets) {
    if (name != p.name) continue;
    base.model.archetype = p.archetype;
    base.model.dropout = p.dropout;
    base.model.encoder.freeze_embeddings = p.frozen;
    base.learning_rate = p.lr;
    return base;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

json to_json(const TrainConfig& c) {
  json j;
  j["model"] = to_json(c.model);
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["patience"] = c.patience;
  j["max_epochs"] = c.max_epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  return j;
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  try {
    if (j.contains("preset")) c = preset(j.at("preset").get<std::string>(), c);
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"), c.model);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.patience = j.value("patience", c.patience);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return train_config_from_json(j, std::move(base));
}

// --- early stopping ---------------------------------------------------------

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw ContractError("patience must be >= 1");
}

bool EarlyStopping::observe(double value) {
  ++epochs_;
  if (best_epoch_ == 0 || value > best_) {
    best_ = value;
    best_epoch_ = epochs_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

json to_json(const TrainResult& r) {
  json j;
  j["best_epoch"] = r.best_epoch;
  j["best_val_em"] = r.best_val_em;
  j["epochs_run"] = r.epochs_run();
  j["stopped_early"] = r.stopped_early;
  j["best_checkpoint"] = r.best_checkpoint ? json(r.best_checkpoint->string()) : json(nullptr);
  json log = json::array();
  for (const auto& e : r.log)
    log.push_back({{"epoch", e.epoch},
                   {"ce", e.train.cross_entropy},
                   {"reg", e.train.regression},
                   {"span", e.train.span_sparsity},
                   {"total", e.train.total},
                   {"val_acc", e.val_accuracy},
                   {"val_em", e.val_em}});
  j["log"] = log;
  return j;
}

// --- prediction -------------------------------------------------------------

std::vector<Prediction> predict_samples(const TvcpModel& model, const std::vector<Sample>& samples,
                                        unsigned threads) {
  std::vector<Prediction> out(samples.size());
  parallel_for(
      samples.size(),
      [&](std::size_t i) {
        const auto& s = samples[i];
        const auto o = model.predict(s.target_text, s.followup_text);
        out[i] = make_prediction(s, o.predicted());
        out[i].predicted_original = o.predicted_original;
        out[i].predicted_updated = o.predicted_updated;
      },
      threads);
  return out;
}

std::vector<Prediction> evaluate_split(const std::filesystem::path& checkpoint, const std::vector<Sample>& samples,
                                       unsigned threads) {
  if (!std::filesystem::exists(checkpoint)) throw IoError("checkpoint '" + checkpoint.string() + "' does not exist");
  return predict_samples(TvcpModel::load(checkpoint), samples, threads);
}

// --- training loop ----------------------------------------------------------

namespace {

std::string metrics_row(const EpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.6f,%.6f", e.epoch, e.train.cross_entropy,
                e.train.regression, e.train.span_sparsity, e.train.total, e.val_accuracy, e.val_em);
  return buf;
}

bool finite(const LossBreakdown& b) {
  return std::isfinite(b.total) && std::isfinite(b.cross_entropy) && std::isfinite(b.regression) &&
         std::isfinite(b.span_sparsity);
}

}  // namespace

TrainOutput train(const TrainConfig& config, const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                  const std::optional<std::filesystem::path>& run_dir) {
  config.validate();
  if (train_set.empty()) throw ContractError("training subset is empty");
  if (val_set.empty()) throw ContractError("validation subset is empty");

  TvcpModel model(config.model);
  auto& params = model.parameters();
  nn::AdamW opt(params, config.optimizer());

  std::vector<TokenizedPair> pairs;
  std::vector<GoldTargets> golds;
  pairs.reserve(train_set.size());
  for (const auto& s : train_set) {
    pairs.push_back(model.tokenize(s.target_text, s.followup_text));
    golds.push_back({s.label, s.original, s.updated});
  }

  std::optional<std::filesystem::path> ckpt;
  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    write_file(*run_dir / "config.json", to_json(config).dump(2) + "\n");
    write_file(*run_dir / "metrics.csv", "epoch,ce,reg,span,total,val_acc,val_em\n");
    ckpt = *run_dir / "best.ckpt";
  }

  TrainResult result;
  EarlyStopping stopper(config.patience);
  std::vector<nn::Matrix> best_values;
  std::vector<nn::Gradients> shard_grads(kShards, nn::Gradients(params));
  nn::Gradients total(params);
  std::vector<std::size_t> order(train_set.size());
  std::vector<LossBreakdown> sample_loss(train_set.size());

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(mix_seed(config.seed, 0x5348554646ULL, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    const auto bs = static_cast<std::size_t>(config.batch_size);
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += bs, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + bs);
      const std::size_t n = end - start;
      const std::size_t shards = std::min<std::size_t>(kShards, n);
      parallel_for(
          shards,
          [&](std::size_t k) {
            auto& grads = shard_grads[k];
            grads.zero();
            for (std::size_t pos = start + n * k / shards; pos < start + n * (k + 1) / shards; ++pos) {
              const std::size_t idx = order[pos];
              nn::Graph g(&params, &grads);
              const auto dropout_seed = mix_seed(config.seed, static_cast<std::uint64_t>(epoch), pos);
              auto fwd = model.forward(g, pairs[idx], dropout_seed);
              auto loss = model.loss(g, fwd, golds[idx]);
              sample_loss[pos] = loss.breakdown;
              if (!std::isfinite(loss.total.scalar())) return;
              g.backward(loss.total);
            }
          },
          config.threads);
      for (std::size_t pos = start; pos < end; ++pos)
        if (!finite(sample_loss[pos]))
          throw DivergenceError(epoch, batch_no + 1, "non-finite training loss");
      total.zero();
      for (std::size_t k = 0; k < shards; ++k) total += shard_grads[k];
      const double inv = 1.0 / static_cast<double>(n);
      for (std::size_t p = 0; p < total.size(); ++p) total[p] *= inv;
      opt.step(params, total);
    }

    EpochLog log;
    log.epoch = epoch;
    for (const auto& b : sample_loss) {
      log.train.cross_entropy += b.cross_entropy;
      log.train.regression += b.regression;
      log.train.span_sparsity += b.span_sparsity;
      log.train.total += b.total;
    }
    const double inv = 1.0 / static_cast<double>(sample_loss.size());
    log.train.cross_entropy *= inv;
    log.train.regression *= inv;
    log.train.span_sparsity *= inv;
    log.train.total *= inv;
    log.train.lambda_reg = config.model.lambda_reg;
    log.train.lambda_span = config.model.lambda_span;

    const auto report = compute_metrics(predict_samples(model, val_set, config.threads));
    log.val_accuracy = report.accuracy;
    log.val_em = report.exact_match;
    result.log.push_back(log);
    if (run_dir) append_line(*run_dir / "metrics.csv", metrics_row(log));

    if (stopper.observe(log.val_em)) {
      best_values.clear();
      for (const auto& p : params) best_values.push_back(p.value);
      if (ckpt) model.save(*ckpt);
    }
    if (stopper.should_stop()) {
      result.stopped_early = epoch < config.max_epochs;
      break;
    }
  }

  for (std::size_t i = 0; i < best_values.size(); ++i) params[i].value = best_values[i];
  result.best_epoch = stopper.best_epoch();
  result.best_val_em = stopper.best();
  result.best_checkpoint = ckpt;
  if (run_dir) write_file(*run_dir / "train_result.json", to_json(result).dump(2) + "\n");
  return {std::move(result), std::move(model)};
}

// --- cross-validation -------------------------------------------------------

double CrossValidationResult::mean_accuracy() const {
  if (folds.empty()) return 0.0;
  double s = 0.0;
  for (const auto& f : folds) s += f.test.accuracy;
  return s / static_cast<double>(folds.size());
}

double CrossValidationResult::mean_em() const {
  if (folds.empty()) return 0.0;
  double s = 0.0;
  for (const auto& f : folds) s += f.test.exact_match;
  return s / static_cast<double>(folds.size());
}

std::vector<Prediction> CrossValidationResult::all_predictions() const {
  std::vector<Prediction> out;
  for (const auto& f : folds) out.insert(out.end(), f.predictions.begin(), f.predictions.end());
  return out;
}

CrossValidationResult cross_validate(const TrainConfig& config, const std::vector<Sample>& samples,
                                     const SplitPlan& plan, const std::optional<std::filesystem::path>& run_root) {
  CrossValidationResult out;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& fold = plan.folds[f];
    TrainConfig cfg = config;
    cfg.seed = mix_seed(config.seed, f);
    std::optional<std::filesystem::path> dir;
    if (run_root) dir = *run_root / ("fold_" + std::to_string(f));
    auto trained = train(cfg, select(samples, fold, Subset::kTrain), select(samples, fold, Subset::kVal), dir);
    FoldResult r;
    r.fold = static_cast<int>(f);
    r.predictions = predict_samples(trained.model, select(samples, fold, Subset::kTest), config.threads);
    r.test = compute_metrics(r.predictions);
    r.train = std::move(trained.result);
    if (dir) {
      save_predictions(*dir / "test_predictions.jsonl", r.predictions);
      write_eval_report(*dir, r.test);
    }
    out.folds.push_back(std::move(r));
  }
  return out;
}

// --- sweep ------------------------------------------------------------------

SweepGrid SweepGrid::standard() { return {{1e-2, 1e-3, 1e-4}, {0.1, 0.25, 0.5}, {true, false}}; }

std::vector<SweepRow> sweep(const SweepGrid& grid, const std::vector<Sample>& samples, const TrainConfig& base,
                            std::uint64_t split_seed, const CellRunner& runner) {
  if (grid.size() == 0) throw ContractError("sweep grid is empty");
  const auto plan = split_holdout(samples, 0.8, 0.1, split_seed);
  const auto& fold = plan.folds.front();
  const auto train_set = select(samples, fold, Subset::kTrain);
  const auto val_set = select(samples, fold, Subset::kVal);
  const auto test_set = select(samples, fold, Subset::kTest);
  const CellRunner run = runner ? runner : CellRunner([](const TrainConfig& c, const auto& tr, const auto& va) {
    return train(c, tr, va);
  });

  std::vector<SweepRow> rows;
  for (double lr : grid.learning_rates)
    for (double dropout : grid.dropouts)
      for (bool frozen : grid.freeze) {
        SweepRow row;
        row.learning_rate = lr;
        row.dropout = dropout;
        row.frozen = frozen;
        TrainConfig cfg = base;
        cfg.learning_rate = lr;
        cfg.model.dropout = dropout;
        cfg.model.encoder.freeze_embeddings = frozen;
        try {
          auto out = run(cfg, train_set, val_set);
          row.val_em = compute_metrics(predict_samples(out.model, val_set, cfg.threads)).exact_match;
          const auto test = compute_metrics(predict_samples(out.model, test_set, cfg.threads));
          row.test_accuracy = test.accuracy;
          row.test_em = test.exact_match;
          row.epochs_run = out.result.epochs_run();
          row.best_epoch = out.result.best_epoch;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
        rows.push_back(std::move(row));
      }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.error.has_value() != b.error.has_value()) return !a.error.has_value();
    return a.val_em > b.val_em;
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "learning_rate,dropout,frozen,val_em,test_accuracy,test_em,epochs_run,best_epoch,error\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g,%g,%s,%.6f,%.6f,%.6f,%d,%d,", r.learning_rate, r.dropout,
                  r.frozen ? "true" : "false", r.val_em, r.test_accuracy, r.test_em, r.epochs_run, r.best_epoch);
    std::string err = r.error.value_or("");
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out += buf + err + "\n";
  }
  return out;
}

}  // namespace tvcp
