#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tvcp/annotation.hpp"
#include "tvcp/annotation_server.hpp"
#include "tvcp/dataset.hpp"
#include "tvcp/error.hpp"
#include "tvcp/evaluation.hpp"
#include "tvcp/filters.hpp"
#include "tvcp/fraction_curve.hpp"
#include "tvcp/llm.hpp"
#include "tvcp/training.hpp"
#include "tvcp/util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace tvcp;

namespace {

// Every command writes one manifest: <dir>/run_manifest.json for directory
// outputs, <file>.run.json for single-file outputs.
class RunManifest {
 public:
  RunManifest(std::string command, int argc, char** argv) : started_(unix_now()) {
    j_["command"] = std::move(command);
    j_["argv"] = std::vector<std::string>(argv, argv + argc);
    j_["config"] = json::object();
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
  }
  void config(json c) { j_["config"] = std::move(c); }
  void seed(std::uint64_t s) { j_["seed"] = s; }
  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void write(const fs::path& out, bool is_dir) {
    auto hashes = [](const std::vector<fs::path>& paths) {
      json a = json::array();
      for (const auto& p : paths)
        a.push_back({{"path", p.string()}, {"sha256", fs::is_regular_file(p) ? json(sha256_file(p)) : json()}});
      return a;
    };
    j_["inputs"] = hashes(inputs_);
    j_["outputs"] = hashes(outputs_);
    j_["started_at"] = iso8601(started_);
    j_["finished_at"] = iso8601(unix_now());
    fs::path target = out;
    if (is_dir) target /= "run_manifest.json";
    else target += ".run.json";
    write_file(target, j_.dump(2) + "\n");
  }

 private:
  json j_;
  std::int64_t started_;
  std::vector<fs::path> inputs_, outputs_;
};

std::vector<Sample> load_strict(const fs::path& p) { return load_and_validate(p, ValidationMode::kStrict).samples; }

// Model and optimizer flags shared by train, sweep and fraction-curve. Flags
// override the config file, which overrides the preset.
struct TrainFlags {
  std::string config_path, preset_name, archetype;
  double lr = 0, dropout = 0, lambda_reg = 0, lambda_span = 0;
  int epochs = 0, batch = 0, patience = 0, hidden = 0, layers = 0, heads = 0, max_length = 0, span_length = 0;
  bool multitask = false, freeze = false;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app) {
    opts["config"] = app->add_option("--config", config_path, "training config file (JSON)")->check(CLI::ExistingFile);
    opts["preset"] = app->add_option("--preset", preset_name, "tf-bert | s-bert | tf-roberta | s-roberta | selfexplain");
    opts["archetype"] = app->add_option("--archetype", archetype, "transformer | siamese | selfexplain");
    opts["lr"] = app->add_option("--lr", lr, "learning rate");
    opts["dropout"] = app->add_option("--dropout", dropout, "dropout before the classifier");
    opts["lambda_reg"] = app->add_option("--lambda-reg", lambda_reg, "regression loss weight");
    opts["lambda_span"] = app->add_option("--lambda-span", lambda_span, "span sparsity weight");
    opts["epochs"] = app->add_option("--epochs", epochs, "maximum epochs");
    opts["batch"] = app->add_option("--batch-size", batch, "batch size");
    opts["patience"] = app->add_option("--patience", patience, "early stopping patience");
    opts["hidden"] = app->add_option("--hidden", hidden, "encoder hidden size");
    opts["layers"] = app->add_option("--layers", layers, "encoder layers");
    opts["heads"] = app->add_option("--heads", heads, "attention heads");
    opts["max_length"] = app->add_option("--max-length", max_length, "max sequence length");
    opts["span_length"] = app->add_option("--span-length", span_length, "max span length (selfexplain)");
    opts["multitask"] = app->add_flag("--multitask", multitask, "add duration regression heads");
    opts["freeze"] = app->add_flag("--freeze-embeddings", freeze, "freeze embedding layers");
    opts["seed"] = app->add_option("--seed", seed, "random seed");
    opts["threads"] = app->add_option("--threads", threads, "worker threads (0 = all cores)");
  }
  bool set(const char* k) const { return opts.at(k)->count() > 0; }

  TrainConfig resolve() const {
    TrainConfig c;
    if (set("preset")) c = preset(preset_name, c);
    if (set("config")) c = load_train_config(config_path, c);
    auto& m = c.model;
    if (set("archetype")) m.archetype = parse_archetype(archetype);
    if (set("lr")) c.learning_rate = lr;
    if (set("dropout")) m.dropout = dropout;
    if (set("lambda_reg")) m.lambda_reg = lambda_reg;
    if (set("lambda_span")) m.lambda_span = lambda_span;
    if (set("epochs")) c.max_epochs = epochs;
    if (set("batch")) c.batch_size = batch;
    if (set("patience")) c.patience = patience;
    if (set("hidden")) m.encoder.hidden = hidden;
    if (set("layers")) m.encoder.layers = layers;
    if (set("heads")) m.encoder.heads = heads;
    if (set("max_length")) m.encoder.max_length = max_length;
    if (set("span_length")) m.max_span_length = span_length;
    if (set("multitask")) m.multitask = multitask;
    if (set("freeze")) m.encoder.freeze_embeddings = freeze;
    if (set("seed")) {
      c.seed = seed;
      m.init_seed = seed;
    }
    c.threads = threads;
    try {
      c.validate();
    } catch (const ContractError& e) {
      throw ConfigError(e.what());  // bad flag values are usage errors
    }
    return c;
  }
};

std::vector<double> parse_fractions(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad fraction '" + tok + "'");
    }
  }
  return out;
}

std::vector<CandidateStatement> read_candidates(const fs::path& p) {
  std::vector<CandidateStatement> out;
  std::istringstream in(read_file(p));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    if (trim(line).front() == '{') {
      try {
        const auto j = json::parse(line);
        out.push_back({j.at("id").get<std::string>(), j.at("text").get<std::string>()});
      } catch (const json::exception& e) {
        throw ParseError(n, e.what());
      }
    } else {
      out.push_back({"line-" + std::to_string(n), line});
    }
  }
  return out;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal validity change prediction benchmark"};
  app.require_subcommand(1);
  std::function<void()> run;

  // prepare
  auto* prepare = app.add_subcommand("prepare", "run the candidate filter chain");
  fs::path prep_in, prep_cfg, prep_out;
  std::size_t prep_k = 0;
  prepare->add_option("--input", prep_in, "statements: JSONL {id,text} or one per line")->required()->check(CLI::ExistingFile);
  auto* prep_cfg_opt = prepare->add_option("--config", prep_cfg, "filter chain config")->check(CLI::ExistingFile);
  auto* prep_k_opt = prepare->add_option("--k", prep_k, "number of candidates to select");
  prepare->add_option("--out", prep_out, "output directory")->required();
  prepare->callback([&] {
    run = [&] {
      RunManifest m("prepare", argc, argv);
      FilterChainConfig cfg;
      if (prep_cfg_opt->count()) {
        cfg = load_filter_chain_config(prep_cfg);
        m.input(prep_cfg);
      }
      if (prep_k_opt->count()) cfg.k = prep_k;
      m.input(prep_in);
      const auto statements = read_candidates(prep_in);
      const auto verdicts = apply_filter_chain(statements, cfg);
      std::string lines;
      for (const auto& v : verdicts) {
        json j{{"id", v.statement_id}, {"passed", v.passed},
               {"failing_stage", v.failing_stage ? json(*v.failing_stage) : json()}, {"scores", v.scores}};
        lines += j.dump() + "\n";
      }
      write_file(prep_out / "verdicts.jsonl", lines);
      std::string sel;
      for (const auto& id : select_candidates(verdicts, cfg.k)) sel += id + "\n";
      write_file(prep_out / "selected.txt", sel);
      m.output(prep_out / "verdicts.jsonl");
      m.output(prep_out / "selected.txt");
      m.config({{"stages", cfg.stages}, {"min_words", cfg.min_words}, {"max_words", cfg.max_words},
                {"min_score", cfg.min_score}, {"k", cfg.k}});
      m.write(prep_out, true);
      std::size_t passed = std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.passed; });
      std::cout << "statements " << verdicts.size() << ", passed " << passed << "\n";
    };
  });

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  int synth_targets = 100;
  std::uint64_t synth_seed = 0;
  fs::path synth_out;
  synth->add_option("--targets", synth_targets, "number of targets")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--out", synth_out, "output dataset file")->required();
  synth->callback([&] {
    run = [&] {
      RunManifest m("synth", argc, argv);
      save_dataset(synth_out, synth_generate(synth_targets, synth_seed));
      m.seed(synth_seed);
      m.config({{"targets", synth_targets}});
      m.output(synth_out);
      m.write(synth_out, false);
      std::cout << "wrote " << 3 * synth_targets << " samples to " << synth_out.string() << "\n";
    };
  });

  // split
  auto* split = app.add_subcommand("split", "grouped k-fold or holdout split plan");
  fs::path split_data, split_out;
  int split_folds = 5;
  std::uint64_t split_seed = 0;
  std::string split_holdout_s;
  split->add_option("--data", split_data, "dataset file")->required()->check(CLI::ExistingFile);
  split->add_option("--folds", split_folds, "number of folds");
  split->add_option("--seed", split_seed, "random seed");
  auto* holdout_opt = split->add_option("--holdout", split_holdout_s, "train,val fractions for a single split (e.g. 0.8,0.1)");
  split->add_option("--out", split_out, "split plan file")->required();
  split->callback([&] {
    run = [&] {
      RunManifest m("split", argc, argv);
      const auto samples = load_strict(split_data);
      SplitPlan plan;
      if (holdout_opt->count()) {
        const auto f = parse_fractions(split_holdout_s);
        if (f.size() != 2) throw ConfigError("--holdout expects two fractions");
        plan = split_holdout(samples, f[0], f[1], split_seed);
      } else {
        plan = split_grouped_kfold(samples, split_folds, split_seed);
      }
      save_split_plan(split_out, plan);
      m.seed(split_seed);
      m.config({{"folds", plan.folds.size()}, {"holdout", holdout_opt->count() > 0}});
      m.input(split_data);
      m.output(split_out);
      m.write(split_out, false);
      std::cout << "wrote " << plan.folds.size() << " fold(s) to " << split_out.string() << "\n";
    };
  });

  // train
  auto* train_cmd = app.add_subcommand("train", "train on one fold or cross-validate over all folds");
  TrainFlags train_flags;
  fs::path train_data, train_plan, train_out;
  std::string train_fold = "all";
  train_cmd->add_option("--data", train_data, "dataset file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--plan", train_plan, "split plan file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--fold", train_fold, "fold index or 'all'");
  train_cmd->add_option("--out", train_out, "run directory")->required();
  train_flags.add(train_cmd);
  train_cmd->callback([&] {
    run = [&] {
      RunManifest m("train", argc, argv);
      const auto cfg = train_flags.resolve();
      const auto samples = load_strict(train_data);
      const auto plan = load_split_plan(train_plan);
      m.config(to_json(cfg));
      m.seed(cfg.seed);
      m.input(train_data);
      m.input(train_plan);
      if (train_fold == "all") {
        const auto cv = cross_validate(cfg, samples, plan, train_out);
        json summary{{"mean_accuracy", cv.mean_accuracy()}, {"mean_em", cv.mean_em()}, {"folds", json::array()}};
        for (const auto& f : cv.folds) {
          summary["folds"].push_back({{"fold", f.fold}, {"accuracy", f.test.accuracy}, {"em", f.test.exact_match},
                                      {"best_epoch", f.train.best_epoch}, {"epochs_run", f.train.epochs_run()}});
          m.output(train_out / ("fold_" + std::to_string(f.fold)) / "best.ckpt");
        }
        const auto all = cv.all_predictions();
        save_predictions(train_out / "test_predictions.jsonl", all);
        write_eval_report(train_out, compute_metrics(all));
        write_file(train_out / "cv_summary.json", summary.dump(2) + "\n");
        m.output(train_out / "test_predictions.jsonl");
        m.output(train_out / "cv_summary.json");
        print(summary);
      } else {
        std::size_t f = 0;
        try {
          f = static_cast<std::size_t>(std::stoul(train_fold));
        } catch (const std::logic_error&) {
          throw ConfigError("--fold expects an index or 'all', got '" + train_fold + "'");
        }
        if (f >= plan.folds.size()) throw ConfigError("fold " + train_fold + " not in plan");
        auto fcfg = cfg;
        fcfg.seed = mix_seed(cfg.seed, f);
        const auto& fold = plan.folds[f];
        auto out = train(fcfg, select(samples, fold, Subset::kTrain), select(samples, fold, Subset::kVal), train_out);
        const auto preds = predict_samples(out.model, select(samples, fold, Subset::kTest), cfg.threads);
        const auto report = compute_metrics(preds);
        save_predictions(train_out / "test_predictions.jsonl", preds);
        write_eval_report(train_out, report);
        m.output(train_out / "best.ckpt");
        m.output(train_out / "test_predictions.jsonl");
        print({{"fold", f}, {"best_epoch", out.result.best_epoch}, {"best_val_em", out.result.best_val_em},
               {"test", to_json(report)}});
      }
      m.write(train_out, true);
    };
  });

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "learning rate x dropout x freeze grid on an 80/10/10 split");
  TrainFlags sweep_flags;
  fs::path sweep_data, sweep_out;
  std::string sweep_lrs = "1e-2,1e-3,1e-4", sweep_dropouts = "0.1,0.25,0.5", sweep_freeze = "frozen,unfrozen";
  std::uint64_t sweep_split_seed = 0;
  sweep_cmd->add_option("--data", sweep_data, "dataset file")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--lrs", sweep_lrs, "comma-separated learning rates");
  sweep_cmd->add_option("--dropouts", sweep_dropouts, "comma-separated dropouts");
  sweep_cmd->add_option("--freeze", sweep_freeze, "frozen,unfrozen | frozen | unfrozen");
  sweep_cmd->add_option("--split-seed", sweep_split_seed, "seed of the 80/10/10 split");
  sweep_cmd->add_option("--out", sweep_out, "output directory")->required();
  sweep_flags.add(sweep_cmd);
  sweep_cmd->callback([&] {
    run = [&] {
      RunManifest m("sweep", argc, argv);
      const auto cfg = sweep_flags.resolve();
      SweepGrid grid{parse_fractions(sweep_lrs), parse_fractions(sweep_dropouts), {}};
      std::stringstream fz(sweep_freeze);
      std::string tok;
      while (std::getline(fz, tok, ',')) {
        if (tok == "frozen") grid.freeze.push_back(true);
        else if (tok == "unfrozen") grid.freeze.push_back(false);
        else throw ConfigError("--freeze accepts frozen and unfrozen");
      }
      const auto rows = sweep(grid, load_strict(sweep_data), cfg, sweep_split_seed);
      write_file(sweep_out / "sweep.csv", sweep_csv(rows));
      m.config(to_json(cfg));
      m.seed(sweep_split_seed);
      m.input(sweep_data);
      m.output(sweep_out / "sweep.csv");
      m.write(sweep_out, true);
      std::cout << sweep_csv(rows);
    };
  });

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  fs::path eval_ckpt, eval_data, eval_plan, eval_out;
  std::size_t eval_fold = 0;
  std::string eval_subset = "test";
  unsigned eval_threads = 0;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "dataset file")->required()->check(CLI::ExistingFile);
  auto* eval_plan_opt = eval_cmd->add_option("--plan", eval_plan, "restrict to a subset of a split plan")->check(CLI::ExistingFile);
  eval_cmd->add_option("--fold", eval_fold, "fold index with --plan");
  eval_cmd->add_option("--subset", eval_subset, "train | val | test with --plan");
  eval_cmd->add_option("--threads", eval_threads, "worker threads");
  eval_cmd->add_option("--out", eval_out, "report directory")->required();
  eval_cmd->callback([&] {
    run = [&] {
      RunManifest m("eval", argc, argv);
      auto samples = load_strict(eval_data);
      m.input(eval_ckpt);
      m.input(eval_data);
      if (eval_plan_opt->count()) {
        const auto plan = load_split_plan(eval_plan);
        if (eval_fold >= plan.folds.size()) throw ConfigError("fold not in plan");
        const Subset s = eval_subset == "train" ? Subset::kTrain : eval_subset == "val" ? Subset::kVal : Subset::kTest;
        samples = select(samples, plan.folds[eval_fold], s);
        m.input(eval_plan);
      }
      const auto preds = evaluate_split(eval_ckpt, samples, eval_threads);
      const auto report = compute_metrics(preds);
      save_predictions(eval_out / "predictions.jsonl", preds);
      write_eval_report(eval_out, report);
      m.config({{"fold", eval_fold}, {"subset", eval_subset}});
      m.output(eval_out / "predictions.jsonl");
      m.output(eval_out / "metrics.json");
      m.output(eval_out / "per_delta.csv");
      m.write(eval_out, true);
      print(to_json(report));
    };
  });

  // llm-eval
  auto* llm_cmd = app.add_subcommand("llm-eval", "few-shot chain-of-thought evaluation of a chat endpoint");
  fs::path llm_data, llm_cache, llm_out;
  llm::HttpClientConfig http;
  unsigned llm_conc = 4;
  bool llm_hint = false;
  llm_cmd->add_option("--data", llm_data, "dataset file")->required()->check(CLI::ExistingFile);
  llm_cmd->add_option("--endpoint", http.endpoint, "API base, e.g. https://api.openai.com/v1");
  llm_cmd->add_option("--model", http.model, "model name");
  llm_cmd->add_option("--temperature", http.temperature, "sampling temperature");
  llm_cmd->add_option("--concurrency", llm_conc, "max requests in flight");
  llm_cmd->add_option("--cache", llm_cache, "response cache directory")->required();
  llm_cmd->add_flag("--duration-hint", llm_hint, "append the duration scale to the system prompt");
  llm_cmd->add_option("--out", llm_out, "report directory")->required();
  llm_cmd->callback([&] {
    run = [&] {
      RunManifest m("llm-eval", argc, argv);
      const auto samples = load_strict(llm_data);
      llm::HttpChatClient client(http);
      llm::EvalRunConfig cfg;
      cfg.cache_dir = llm_cache;
      cfg.concurrency = llm_conc;
      cfg.prompt.duration_scale_hint = llm_hint;
      const auto r = llm::run_llm_eval(samples, client, cfg);
      save_predictions(llm_out / "predictions.jsonl", r.predictions);
      write_eval_report(llm_out, r.report);
      std::string recs;
      for (const auto& rec : r.records) recs += llm::to_json(rec).dump() + "\n";
      write_file(llm_out / "responses.jsonl", recs);
      json summary{{"client_calls", r.client_calls}, {"cache_hits", r.cache_hits}, {"unparsed", r.unparsed},
                   {"failures", r.failures}, {"report", to_json(r.report)}};
      write_file(llm_out / "summary.json", summary.dump(2) + "\n");
      m.config({{"endpoint", http.endpoint}, {"model", http.model}, {"temperature", http.temperature},
                {"concurrency", llm_conc}, {"duration_hint", llm_hint}});
      m.input(llm_data);
      for (const char* f : {"predictions.jsonl", "metrics.json", "per_delta.csv", "responses.jsonl", "summary.json"})
        m.output(llm_out / f);
      m.write(llm_out, true);
      print(summary);
    };
  });

  // bootstrap
  auto* boot = app.add_subcommand("bootstrap", "paired bootstrap of B over A");
  fs::path boot_a, boot_b, boot_out;
  std::string boot_metric = "em";
  BootstrapConfig boot_cfg;
  boot->add_option("--a", boot_a, "baseline predictions (JSONL)")->required()->check(CLI::ExistingFile);
  boot->add_option("--b", boot_b, "candidate predictions (JSONL)")->required()->check(CLI::ExistingFile);
  boot->add_option("--metric", boot_metric, "accuracy | em");
  boot->add_option("--resamples", boot_cfg.resamples, "bootstrap resamples");
  boot->add_option("--seed", boot_cfg.seed, "random seed");
  boot->add_flag("--add-one", boot_cfg.add_one, "add-one smoothing of p");
  auto* boot_out_opt = boot->add_option("--out", boot_out, "result file (JSON)");
  boot->callback([&] {
    run = [&] {
      RunManifest m("bootstrap", argc, argv);
      boot_cfg.metric = parse_metric(boot_metric);
      const auto r = paired_bootstrap(target_outcomes(load_predictions(boot_a)),
                                      target_outcomes(load_predictions(boot_b)), boot_cfg);
      print(to_json(r));
      if (boot_out_opt->count()) {
        write_file(boot_out, to_json(r).dump(2) + "\n");
        m.seed(boot_cfg.seed);
        m.config({{"metric", boot_metric}, {"resamples", boot_cfg.resamples}, {"add_one", boot_cfg.add_one}});
        m.input(boot_a);
        m.input(boot_b);
        m.output(boot_out);
        m.write(boot_out, false);
      }
    };
  });

  // fraction-curve
  auto* curve = app.add_subcommand("fraction-curve", "accuracy and EM against training data fraction");
  TrainFlags curve_flags;
  fs::path curve_data, curve_plan, curve_out;
  std::string curve_fracs = "0.1,0.2,0.4,0.6,0.8,1.0";
  std::size_t curve_fold = 0;
  std::uint64_t curve_sub_seed = 0;
  curve->add_option("--data", curve_data, "dataset file")->required()->check(CLI::ExistingFile);
  curve->add_option("--plan", curve_plan, "split plan file")->required()->check(CLI::ExistingFile);
  curve->add_option("--fold", curve_fold, "fold whose test subset is used");
  curve->add_option("--fractions", curve_fracs, "comma-separated ascending fractions");
  curve->add_option("--subsample-seed", curve_sub_seed, "seed of the nested subsamples");
  curve->add_option("--out", curve_out, "output directory")->required();
  curve_flags.add(curve);
  curve->callback([&] {
    run = [&] {
      RunManifest m("fraction-curve", argc, argv);
      const auto cfg = curve_flags.resolve();
      const auto rows = data_fraction_curve(parse_fractions(curve_fracs), load_strict(curve_data),
                                            load_split_plan(curve_plan), cfg, curve_sub_seed, curve_fold);
      write_file(curve_out / "fraction_curve.csv", fraction_curve_csv(rows));
      for (const auto& r : rows)
        if (r.error) std::cerr << "fraction " << r.fraction << " failed: " << *r.error << "\n";
      m.config(to_json(cfg));
      m.seed(curve_sub_seed);
      m.input(curve_data);
      m.input(curve_plan);
      m.output(curve_out / "fraction_curve.csv");
      m.write(curve_out, true);
      std::cout << fraction_curve_csv(rows);
    };
  });

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "run the annotation service");
  fs::path serve_log;
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  serve_cmd->add_option("--log", serve_log, "event log (JSONL, append-only)")->required();
  serve_cmd->add_option("--host", serve_host, "bind address");
  serve_cmd->add_option("--port", serve_port, "port");
  serve_cmd->callback([&] {
    run = [&] {
      RunManifest m("serve", argc, argv);
      m.config({{"host", serve_host}, {"port", serve_port}});
      m.input(serve_log);
      m.write(serve_log, false);
      annotation::AnnotationService svc(serve_log);
      std::cout << "listening on " << serve_host << ":" << serve_port << "\n" << std::flush;
      annotation::serve(svc, serve_host, serve_port);
    };
  });

  // export
  auto* export_cmd = app.add_subcommand("export", "export the annotated dataset from an event log");
  fs::path export_log, export_out;
  export_cmd->add_option("--log", export_log, "event log")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", export_out, "output directory")->required();
  export_cmd->callback([&] {
    run = [&] {
      RunManifest m("export", argc, argv);
      annotation::AnnotationService svc(export_log);
      const auto r = svc.export_dataset(export_out);
      m.input(export_log);
      m.output(export_out / "dataset.jsonl");
      m.output(export_out / "manifest.json");
      m.write(export_out, true);
      print(r.manifest);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    run();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
