// Command-line front end: dataset generation, training, feature synthesis,
// evaluation, score aggregation, and the two ablation grids. Every
// artifact-producing run writes a manifest.json (arguments, seed, resolved
// config, code version) so it can be reproduced from the manifest alone.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ambigzsl/dataset.hpp"
#include "ambigzsl/eval.hpp"
#include "ambigzsl/log.hpp"
#include "ambigzsl/losses.hpp"
#include "ambigzsl/mixer.hpp"
#include "ambigzsl/nets.hpp"
#include "ambigzsl/pipeline.hpp"
#include "ambigzsl/rng.hpp"
#include "ambigzsl/trainer.hpp"
#include "ambigzsl/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using namespace ambigzsl;

struct Options {
  std::string config_path;
  std::string data_dir;
  std::string dataset;
  std::string out_dir;
  uint64_t seed = 0;
  std::string mode;
  std::string lambda_policy;
  std::string pool;

  // gen-data bundle shape
  int n_seen = 5;
  int n_unseen = 3;
  int feature_dim = 16;
  int prototype_dim = 8;
  int per_class = 40;
  double noise = 0.05;

  // synth / eval / aggregate
  std::string checkpoint;
  std::string classes = "unseen";
  int synth_per_class = -1;
  std::string method = "Ours";
  std::string scores_path;
  std::string reference;
  std::string setting;
  std::string metric;
};

void write_manifest(const fs::path& dir, const std::string& command, json args,
                    uint64_t seed, const TrainConfig* config) {
  json doc;
  doc["command"] = command;
  doc["args"] = std::move(args);
  doc["seed"] = seed;
  doc["version"] = {{"version", kVersion}, {"git_sha", kGitSha}};
  if (config) doc["config"] = json::parse(config_to_json(*config));
  const fs::path path = dir / "manifest.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

DatasetBundle load_bundle(const Options& opt) {
  const fs::path data(opt.data_dir);
  if (fs::exists(data / "split.json")) {
    std::string name = opt.dataset;
    if (name.empty()) name = fs::absolute(data).lexically_normal().filename().string();
    if (name.empty()) name = "dataset";
    return load_dataset_dir(data, name);
  }
  if (!opt.dataset.empty()) return load_dataset(data, opt.dataset);
  throw std::runtime_error("--data: '" + opt.data_dir +
                           "' contains no split.json; point it at a bundle directory "
                           "or add --dataset NAME");
}

TrainedModel load_model(const std::string& path) {
  LoadedCheckpoint ck = load_checkpoint(path);
  TrainedModel model;
  model.params = std::move(ck.params);
  model.config = config_from_json(ck.config_json);
  return model;
}

TrainConfig resolve_config(const CLI::App* sub, const Options& opt) {
  TrainConfig cfg =
      opt.config_path.empty() ? TrainConfig{} : load_config(opt.config_path);
  if (sub->count("--seed")) cfg.seed = opt.seed;
  if (!opt.mode.empty()) cfg.mode = parse_train_mode(opt.mode);
  if (!opt.lambda_policy.empty()) cfg.lambda_policy = parse_lambda_policy(opt.lambda_policy);
  if (!opt.pool.empty()) cfg.pool = parse_pool(opt.pool);
  return cfg;
}

void write_labeled_csv(const LabeledFeatures& set, const fs::path& dir) {
  char buf[40];
  std::ofstream fout(dir / "features.csv");
  if (!fout) throw std::runtime_error("cannot write " + (dir / "features.csv").string());
  for (Eigen::Index i = 0; i < set.features.rows(); ++i) {
    for (Eigen::Index j = 0; j < set.features.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.9g", set.features(i, j));
      if (j) fout << ',';
      fout << buf;
    }
    fout << '\n';
  }
  std::ofstream lout(dir / "labels.csv");
  if (!lout) throw std::runtime_error("cannot write " + (dir / "labels.csv").string());
  for (int label : set.labels) lout << label << '\n';
}

void append_rows(LabeledFeatures& dst, const LabeledFeatures& src) {
  if (src.features.rows() == 0) return;
  if (dst.features.rows() == 0) {
    dst = src;
    return;
  }
  Eigen::MatrixXd merged(dst.features.rows() + src.features.rows(), src.features.cols());
  merged << dst.features, src.features;
  dst.features = std::move(merged);
  dst.labels.insert(dst.labels.end(), src.labels.begin(), src.labels.end());
}

std::vector<ScoreRow> score_rows(const std::string& method,
                                 const std::vector<MetricsRecord>& records) {
  std::vector<ScoreRow> rows;
  for (const MetricsRecord& r : records) {
    const std::string setting = to_string(r.setting);
    if (is_gzsl(r.setting)) {
      rows.push_back({method, r.dataset, setting, "u", r.u});
      rows.push_back({method, r.dataset, setting, "s", r.s});
      rows.push_back({method, r.dataset, setting, "H", r.h});
    } else {
      rows.push_back({method, r.dataset, setting, "T1", r.t1});
    }
  }
  return rows;
}

int cmd_gen_data(const Options& opt) {
  DatasetBundle bundle =
      generate_synthetic_bundle(opt.n_seen, opt.n_unseen, opt.feature_dim,
                                opt.prototype_dim, opt.per_class, opt.noise, opt.seed);
  fs::create_directories(opt.out_dir);
  save_bundle(bundle, opt.out_dir);
  write_manifest(opt.out_dir, "gen-data",
                 json{{"seen", opt.n_seen},
                      {"unseen", opt.n_unseen},
                      {"feature_dim", opt.feature_dim},
                      {"prototype_dim", opt.prototype_dim},
                      {"per_class", opt.per_class},
                      {"noise", opt.noise}},
                 opt.seed, nullptr);
  log_info("wrote bundle '" + bundle.name() + "' (" +
           std::to_string(bundle.total_count()) + " samples) to " + opt.out_dir);
  return 0;
}

int cmd_train(const CLI::App* sub, const Options& opt) {
  TrainConfig cfg = resolve_config(sub, opt);
  DatasetBundle bundle = load_bundle(opt);
  fs::create_directories(opt.out_dir);
  LossLog loss_log(fs::path(opt.out_dir) / "loss_log.csv");
  TrainedModel model = train(bundle, cfg, &loss_log);
  save_config(model.config, fs::path(opt.out_dir) / "config.json");
  save_checkpoint(fs::path(opt.out_dir) / "checkpoint.json", model.params,
                  config_to_json(model.config));
  write_manifest(opt.out_dir, "train",
                 json{{"data", opt.data_dir},
                      {"dataset", bundle.name()},
                      {"config", opt.config_path}},
                 model.config.seed, &model.config);
  log_info("trained on '" + bundle.name() + "': " +
           std::to_string(model.generator_updates) + " generator updates, " +
           std::to_string(model.critic_updates) + " critic updates");
  return 0;
}

int cmd_synth(const Options& opt) {
  DatasetBundle bundle = load_bundle(opt);
  TrainedModel model = load_model(opt.checkpoint);
  const SplitSpec& split = bundle.split();

  LabeledFeatures out_set;
  auto take = [&](const std::vector<int>& ids, int fallback, const char* stream) {
    const int n = opt.synth_per_class >= 0 ? opt.synth_per_class : fallback;
    append_rows(out_set, synthesize_features(model, bundle, ids, n,
                                             derive_stream_seed(opt.seed, stream)));
  };
  if (opt.classes == "seen" || opt.classes == "both")
    take(split.seen_classes, model.config.synth_per_seen, "synth-seen");
  if (opt.classes == "unseen" || opt.classes == "both")
    take(split.unseen_classes, model.config.synth_per_unseen, "synth-unseen");

  fs::create_directories(opt.out_dir);
  write_labeled_csv(out_set, opt.out_dir);
  write_manifest(opt.out_dir, "synth",
                 json{{"data", opt.data_dir},
                      {"dataset", bundle.name()},
                      {"checkpoint", opt.checkpoint},
                      {"classes", opt.classes},
                      {"per_class", opt.synth_per_class}},
                 opt.seed, &model.config);
  log_info("synthesized " + std::to_string(out_set.labels.size()) + " rows to " +
           opt.out_dir);
  return 0;
}

int cmd_eval(const Options& opt) {
  DatasetBundle bundle = load_bundle(opt);
  TrainedModel model = load_model(opt.checkpoint);
  EvalOutcome outcome = evaluate_model(model, bundle, opt.seed);
  const std::vector<MetricsRecord> records{outcome.zsl, outcome.gzsl};

  fs::create_directories(opt.out_dir);
  emit_report(records, {}, fs::path(opt.out_dir) / "report.json",
              fs::path(opt.out_dir) / "report.txt");
  write_score_csv(score_rows(opt.method, records), fs::path(opt.out_dir) / "scores.csv");
  write_manifest(opt.out_dir, "eval",
                 json{{"data", opt.data_dir},
                      {"dataset", bundle.name()},
                      {"checkpoint", opt.checkpoint},
                      {"method", opt.method}},
                 opt.seed, &model.config);
  std::fputs(report_table(records, {}).c_str(), stdout);
  return 0;
}

int cmd_aggregate(const Options& opt) {
  const std::vector<ScoreRow> rows = read_score_csv(opt.scores_path);
  const EvalSetting setting = parse_eval_setting(opt.setting);
  const std::string metric =
      opt.metric.empty() ? (is_gzsl(setting) ? "H" : "T1") : opt.metric;
  const std::string setting_text = to_string(setting);

  std::map<std::string, std::map<std::string, double>> by_method;
  for (const ScoreRow& row : rows)
    if (row.setting == setting_text && row.metric == metric)
      by_method[row.method][row.dataset] = row.value;

  auto ref_it = by_method.find(opt.reference);
  if (ref_it == by_method.end())
    throw std::runtime_error("--reference: no " + setting_text + "/" + metric +
                             " rows for method '" + opt.reference + "' in " +
                             opt.scores_path);

  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-18s mNRG vs %s (%s, %s)\n", "method",
                opt.reference.c_str(), setting_text.c_str(), metric.c_str());
  std::string table = buf;
  json methods = json::object();
  for (const auto& [name, scores] : by_method) {
    if (name == opt.reference) continue;
    // A method reported on fewer datasets is aggregated over the datasets
    // it has; the reference must still cover all of them.
    std::map<std::string, double> ref_view;
    for (const auto& [ds, value] : scores) {
      (void)value;
      auto it = ref_it->second.find(ds);
      if (it != ref_it->second.end()) ref_view.emplace(ds, it->second);
    }
    AggregateReport rep = mnrg(scores, ref_view, opt.reference);
    std::snprintf(buf, sizeof(buf), "%-18s %6.1f\n", name.c_str(), rep.mnrg);
    table += buf;
    json gains = json::object();
    for (const auto& [ds, gain] : rep.per_dataset_gains) gains[ds] = gain;
    methods[name] = {{"gains", std::move(gains)}, {"mnrg", rep.mnrg}};
  }
  std::fputs(table.c_str(), stdout);

  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    json doc{{"setting", setting_text},
             {"metric", metric},
             {"reference", opt.reference},
             {"methods", std::move(methods)}};
    std::ofstream jout(fs::path(opt.out_dir) / "aggregate.json");
    if (!jout)
      throw std::runtime_error("cannot write " +
                               (fs::path(opt.out_dir) / "aggregate.json").string());
    jout << doc.dump(2) << '\n';
    std::ofstream tout(fs::path(opt.out_dir) / "aggregate.txt");
    tout << table;
    write_manifest(opt.out_dir, "aggregate",
                   json{{"scores", opt.scores_path},
                        {"reference", opt.reference},
                        {"setting", setting_text},
                        {"metric", metric}},
                   opt.seed, nullptr);
  }
  return 0;
}

// Shared driver for the two ablation grids: one full train + eval per grid
// point, each with a seed derived from the point's name.
int run_grid(const CLI::App* sub, const Options& opt, const std::string& command,
             const std::string& axis, const std::vector<std::string>& grid) {
  const TrainConfig base = resolve_config(sub, opt);
  DatasetBundle bundle = load_bundle(opt);
  fs::create_directories(opt.out_dir);

  std::vector<ScoreRow> rows;
  json points = json::array();
  char buf[200];
  std::snprintf(buf, sizeof(buf), "%-18s %7s %7s %7s %7s\n", axis.c_str(), "T1", "u",
                "s", "H");
  std::string table = buf;

  for (const std::string& point : grid) {
    TrainConfig cfg = base;
    if (axis == "policy")
      cfg.lambda_policy = parse_lambda_policy(point);
    else
      cfg.pool = parse_pool(point);
    cfg.seed = derive_stream_seed(base.seed, point);

    log_info(command + ": " + axis + " = " + point);
    TrainedModel model = train(bundle, cfg);
    EvalOutcome outcome =
        evaluate_model(model, bundle, derive_stream_seed(cfg.seed, "eval"));

    std::snprintf(buf, sizeof(buf), "%-18s %7.1f %7.1f %7.1f %7.1f\n", point.c_str(),
                  outcome.zsl.t1, outcome.gzsl.u, outcome.gzsl.s, outcome.gzsl.h);
    table += buf;
    auto point_rows = score_rows(point, {outcome.zsl, outcome.gzsl});
    rows.insert(rows.end(), point_rows.begin(), point_rows.end());
    points.push_back(json{{axis, point},
                          {"seed", cfg.seed},
                          {"dataset", outcome.zsl.dataset},
                          {"t1", outcome.zsl.t1},
                          {"u", outcome.gzsl.u},
                          {"s", outcome.gzsl.s},
                          {"h", outcome.gzsl.h}});
  }

  write_score_csv(rows, fs::path(opt.out_dir) / "scores.csv");
  std::ofstream jout(fs::path(opt.out_dir) / "report.json");
  if (!jout)
    throw std::runtime_error("cannot write " +
                             (fs::path(opt.out_dir) / "report.json").string());
  jout << json{{"grid", std::move(points)}}.dump(2) << '\n';
  std::ofstream tout(fs::path(opt.out_dir) / "report.txt");
  tout << table;
  write_manifest(opt.out_dir, command,
                 json{{"data", opt.data_dir},
                      {"config", opt.config_path},
                      {"grid", grid}},
                 base.seed, &base);
  std::fputs(table.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional feature synthesis for zero-shot learning"};
  app.require_subcommand(1);
  Options opt;

  const auto policy_check = CLI::Validator(
      [](std::string& text) {
        try {
          ambigzsl::parse_lambda_policy(text);
          return std::string();
        } catch (const std::exception& e) {
          return std::string(e.what());
        }
      },
      "LAMBDA_POLICY");
  const auto mode_check = CLI::IsMember({"inductive", "transductive"});
  const auto side_check = CLI::IsMember({"seen", "unseen", "both"});
  const auto setting_check = CLI::IsMember({"ZSL-IN", "ZSL-TR", "GZSL-IN", "GZSL-TR"});

  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--data", opt.data_dir, "bundle directory, or root with --dataset")
        ->required();
    sub->add_option("--dataset", opt.dataset, "dataset name under --data");
  };
  auto add_train_overrides = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "training config JSON");
    sub->add_option("--seed", opt.seed, "master seed override");
    sub->add_option("--mode", opt.mode, "training setting override")->check(mode_check);
  };

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset bundle");
  gen->add_option("--out", opt.out_dir, "output bundle directory")->required();
  gen->add_option("--seed", opt.seed, "master seed")->capture_default_str();
  gen->add_option("--seen", opt.n_seen, "seen class count")->capture_default_str();
  gen->add_option("--unseen", opt.n_unseen, "unseen class count")->capture_default_str();
  gen->add_option("--feature-dim", opt.feature_dim, "visual feature dimension")
      ->capture_default_str();
  gen->add_option("--prototype-dim", opt.prototype_dim, "prototype dimension")
      ->capture_default_str();
  gen->add_option("--per-class", opt.per_class, "samples per class")
      ->capture_default_str();
  gen->add_option("--noise", opt.noise, "feature noise scale")->capture_default_str();

  CLI::App* train_cmd = app.add_subcommand("train", "train a model on a bundle");
  add_data(train_cmd);
  train_cmd->add_option("--out", opt.out_dir, "run directory")->required();
  add_train_overrides(train_cmd);
  train_cmd->add_option("--lambda-policy", opt.lambda_policy, "mixing policy override")
      ->check(policy_check);
  train_cmd->add_option("--pool", opt.pool, "mixing pool override")->check(side_check);

  CLI::App* synth = app.add_subcommand("synth", "synthesize features from a checkpoint");
  add_data(synth);
  synth->add_option("--checkpoint", opt.checkpoint, "checkpoint JSON")->required();
  synth->add_option("--out", opt.out_dir, "output directory")->required();
  synth->add_option("--seed", opt.seed, "synthesis seed")->capture_default_str();
  synth->add_option("--classes", opt.classes, "side of the split to synthesize")
      ->check(side_check)
      ->capture_default_str();
  synth->add_option("--per-class", opt.synth_per_class,
                    "rows per class (-1: config default)")
      ->capture_default_str();

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a bundle");
  add_data(eval_cmd);
  eval_cmd->add_option("--checkpoint", opt.checkpoint, "checkpoint JSON")->required();
  eval_cmd->add_option("--out", opt.out_dir, "report directory")->required();
  eval_cmd->add_option("--seed", opt.seed, "evaluation seed")->capture_default_str();
  eval_cmd->add_option("--method", opt.method, "method name in score rows")
      ->capture_default_str();

  CLI::App* agg = app.add_subcommand("aggregate", "median relative gain over a score table");
  agg->add_option("--scores", opt.scores_path, "score CSV path")->required();
  agg->add_option("--reference", opt.reference, "reference method")->required();
  agg->add_option("--setting", opt.setting, "evaluation setting")
      ->required()
      ->check(setting_check);
  agg->add_option("--metric", opt.metric, "score metric (default: T1 for ZSL, H for GZSL)");
  agg->add_option("--out", opt.out_dir, "optional report directory");

  CLI::App* ab_lambda =
      app.add_subcommand("ablate-lambda", "train and evaluate over the mixing-policy grid");
  add_data(ab_lambda);
  ab_lambda->add_option("--out", opt.out_dir, "run directory")->required();
  add_train_overrides(ab_lambda);
  ab_lambda->add_option("--pool", opt.pool, "mixing pool override")->check(side_check);

  CLI::App* ab_pool =
      app.add_subcommand("ablate-pool", "train and evaluate over the mixing-pool grid");
  add_data(ab_pool);
  ab_pool->add_option("--out", opt.out_dir, "run directory")->required();
  add_train_overrides(ab_pool);
  ab_pool->add_option("--lambda-policy", opt.lambda_policy, "mixing policy override")
      ->check(policy_check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(opt);
    if (train_cmd->parsed()) return cmd_train(train_cmd, opt);
    if (synth->parsed()) return cmd_synth(opt);
    if (eval_cmd->parsed()) return cmd_eval(opt);
    if (agg->parsed()) return cmd_aggregate(opt);
    if (ab_lambda->parsed())
      return run_grid(ab_lambda, opt, "ablate-lambda", "policy",
                      {"beta:0.3,0.3", "uniform:0,1", "normal:0.5,0.25", "fixed:0.5",
                       "fixed:0.2"});
    if (ab_pool->parsed())
      return run_grid(ab_pool, opt, "ablate-pool", "pool", {"both", "seen", "unseen"});
  } catch (const std::exception& e) {
    ambigzsl::log_error(e.what());
    return 1;
  }
  return 0;
}
