// End-to-end checks of the command-line tool: exit codes, artifact layout,
// manifest contents, determinism of repeated runs, and the aggregate table.
// Each case spawns the real binary; core is linked only to build fixtures.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ambigzsl/dataset.hpp"
#include "ambigzsl/trainer.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ambigzsl;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: " << path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

bool has_line_with(const std::string& text, const std::string& a, const std::string& b) {
  for (const std::string& line : lines_of(text))
    if (line.find(a) != std::string::npos && line.find(b) != std::string::npos)
      return true;
  return false;
}

RunResult run_cli(const fs::path& scratch, const std::string& args,
                  const std::string& env = "") {
  static int call = 0;
  const fs::path out_path = scratch / ("cli_out_" + std::to_string(call) + ".txt");
  const fs::path err_path = scratch / ("cli_err_" + std::to_string(call) + ".txt");
  ++call;

  std::string cmd;
  if (!env.empty()) cmd += env + " ";
  cmd += "\"" AMBIGZSL_CLI_PATH "\" " + args + " >\"" + out_path.string() + "\" 2>\"" +
         err_path.string() + "\"";
  const int status = std::system(cmd.c_str());

  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_file(out_path);
  result.err = read_file(err_path);
  return result;
}

// Small bundle and config so every spawned run finishes in well under a second.
std::string tiny_gen_args(const fs::path& out_dir, uint64_t seed) {
  return "gen-data --out \"" + out_dir.string() + "\" --seed " + std::to_string(seed) +
         " --seen 3 --unseen 2 --feature-dim 6 --prototype-dim 4 --per-class 6";
}

fs::path write_tiny_config(const fs::path& scratch) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.hidden_dim = 8;
  cfg.z_dim = 4;
  cfg.n_critic = 2;
  cfg.lr = 1e-3;
  cfg.synth_per_unseen = 3;
  cfg.clf_epochs = 2;
  cfg.lambda_policy = parse_lambda_policy("uniform:0,1");
  const fs::path path = scratch / "tiny_config.json";
  save_config(cfg, path);
  return path;
}

}  // namespace

TEST_CASE("help and usage errors") {
  testutil::ScratchDir scratch("cli_usage");

  RunResult help = run_cli(scratch.path(), "--help");
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("gen-data") != std::string::npos);
  CHECK(help.out.find("aggregate") != std::string::npos);

  CHECK(run_cli(scratch.path(), "").exit_code == 2);
  CHECK(run_cli(scratch.path(), "no-such-command").exit_code == 2);
  CHECK(run_cli(scratch.path(), "gen-data --out x --bogus 1").exit_code == 2);
  CHECK(run_cli(scratch.path(),
                "aggregate --scores x.csv --reference R --setting SOMEWHERE")
            .exit_code == 2);
  RunResult bad_policy = run_cli(
      scratch.path(), "train --data x --out y --lambda-policy triangle:0.5");
  CHECK(bad_policy.exit_code == 2);
}

TEST_CASE("gen-data writes a loadable bundle and repeats byte for byte") {
  testutil::ScratchDir scratch("cli_gen");
  const fs::path a = scratch.path() / "a";
  const fs::path b = scratch.path() / "b";

  CHECK(run_cli(scratch.path(), tiny_gen_args(a, 9)).exit_code == 0);
  CHECK(run_cli(scratch.path(), tiny_gen_args(b, 9)).exit_code == 0);

  for (const char* name : {"features.csv", "labels.csv", "prototypes.csv",
                           "split.json", "manifest.json"}) {
    CAPTURE(name);
    CHECK(read_file(a / name) == read_file(b / name));
  }

  DatasetBundle bundle = load_dataset_dir(a, "a");
  CHECK(bundle.total_count() == 30);
  CHECK(bundle.labeled_count() == 18);
  CHECK(bundle.feature_dim() == 6);
  CHECK(bundle.prototype_dim() == 4);

  const json manifest = json::parse(read_file(a / "manifest.json"));
  CHECK(manifest.at("command") == "gen-data");
  CHECK(manifest.at("seed") == 9);
  CHECK(manifest.at("args").at("per_class") == 6);
  CHECK(manifest.at("version").contains("version"));

  // A fresh seed must change the data.
  const fs::path c = scratch.path() / "c";
  CHECK(run_cli(scratch.path(), tiny_gen_args(c, 10)).exit_code == 0);
  CHECK(read_file(a / "features.csv") != read_file(c / "features.csv"));
}

TEST_CASE("train, synth, and eval compose on one bundle") {
  testutil::ScratchDir scratch("cli_pipeline");
  const fs::path data = scratch.path() / "data";
  const fs::path run = scratch.path() / "run";
  const fs::path config = write_tiny_config(scratch.path());

  REQUIRE(run_cli(scratch.path(), tiny_gen_args(data, 9)).exit_code == 0);

  RunResult train = run_cli(scratch.path(), "train --data \"" + data.string() +
                                                "\" --out \"" + run.string() +
                                                "\" --config \"" + config.string() +
                                                "\" --seed 5");
  CHECK(train.exit_code == 0);
  for (const char* name : {"checkpoint.json", "config.json", "loss_log.csv",
                           "manifest.json"}) {
    CAPTURE(name);
    CHECK(fs::exists(run / name));
  }
  // 18 labeled rows, batch 8: two steps per epoch, two epochs, plus a header.
  CHECK(lines_of(read_file(run / "loss_log.csv")).size() == 5);
  const json manifest = json::parse(read_file(run / "manifest.json"));
  CHECK(manifest.at("command") == "train");
  CHECK(manifest.at("seed") == 5);
  CHECK(manifest.at("config").at("epochs") == 2);
  CHECK(manifest.at("config").at("seed") == 5);

  const fs::path synth_a = scratch.path() / "synth_a";
  const fs::path synth_b = scratch.path() / "synth_b";
  const std::string synth_args = "synth --data \"" + data.string() +
                                 "\" --checkpoint \"" + (run / "checkpoint.json").string() +
                                 "\" --classes unseen --per-class 4 --seed 11 --out \"";
  CHECK(run_cli(scratch.path(), synth_args + synth_a.string() + "\"").exit_code == 0);
  CHECK(run_cli(scratch.path(), synth_args + synth_b.string() + "\"").exit_code == 0);
  CHECK(read_file(synth_a / "features.csv") == read_file(synth_b / "features.csv"));

  const auto labels = lines_of(read_file(synth_a / "labels.csv"));
  REQUIRE(labels.size() == 8);  // two unseen classes, four rows each
  CHECK(std::count(labels.begin(), labels.end(), "4") == 4);
  CHECK(std::count(labels.begin(), labels.end(), "5") == 4);
  CHECK(lines_of(read_file(synth_a / "features.csv")).size() == 8);

  const fs::path report_a = scratch.path() / "eval_a";
  const fs::path report_b = scratch.path() / "eval_b";
  const std::string eval_args = "eval --data \"" + data.string() +
                                "\" --checkpoint \"" + (run / "checkpoint.json").string() +
                                "\" --seed 13 --out \"";
  RunResult eval_run = run_cli(scratch.path(), eval_args + report_a.string() + "\"");
  CHECK(eval_run.exit_code == 0);
  CHECK(eval_run.out.find("dataset") != std::string::npos);
  CHECK(eval_run.out.find("ZSL-IN") != std::string::npos);
  CHECK(eval_run.out.find("GZSL-IN") != std::string::npos);
  for (const char* name : {"report.json", "report.txt", "scores.csv", "manifest.json"}) {
    CAPTURE(name);
    CHECK(fs::exists(report_a / name));
  }

  const auto score_lines = lines_of(read_file(report_a / "scores.csv"));
  REQUIRE(score_lines.size() == 5);  // header, T1, then u, s, H
  CHECK(score_lines[0] == "method,dataset,setting,metric,value");
  CHECK(score_lines[1].rfind("Ours,synthetic,ZSL-IN,T1,", 0) == 0);
  CHECK(score_lines[2].rfind("Ours,synthetic,GZSL-IN,u,", 0) == 0);

  const json report = json::parse(read_file(report_a / "report.json"));
  REQUIRE(report.at("records").size() == 2);
  CHECK(report.at("records")[0].contains("t1"));
  CHECK(report.at("records")[1].contains("h"));

  // Same checkpoint and seed: the evaluation artifacts repeat exactly.
  CHECK(run_cli(scratch.path(), eval_args + report_b.string() + "\"").exit_code == 0);
  CHECK(read_file(report_a / "scores.csv") == read_file(report_b / "scores.csv"));
  CHECK(read_file(report_a / "report.json") == read_file(report_b / "report.json"));
}

TEST_CASE("train rejects transductive mode when every row is labeled") {
  testutil::ScratchDir scratch("cli_trans");
  const fs::path data = scratch.path() / "data";

  Eigen::MatrixXf features = Eigen::MatrixXf::Constant(10, 3, 0.5f);
  std::vector<int> labels{1, 1, 1, 1, 1, 2, 2, 2, 2, 2};
  std::vector<ClassPrototype> protos;
  for (int id : {1, 2, 3})
    protos.push_back({id, Eigen::VectorXf::Constant(2, 0.1f * static_cast<float>(id))});
  SplitSpec split;
  split.seen_classes = {1, 2};
  split.unseen_classes = {3};
  NormalizationStats norm{Eigen::VectorXf::Zero(3), Eigen::VectorXf::Ones(3)};
  DatasetBundle bundle("all_labeled", features, labels, 10, protos, split, norm);
  save_bundle(bundle, data);

  RunResult result = run_cli(scratch.path(), "train --data \"" + data.string() +
                                                 "\" --out \"" +
                                                 (scratch.path() / "run").string() +
                                                 "\" --mode transductive");
  CHECK(result.exit_code == 1);
  CHECK(result.err.find("no unlabeled samples") != std::string::npos);
}

TEST_CASE("aggregate reproduces published medians from the score table") {
  testutil::ScratchDir scratch("cli_agg");
  const std::string scores = std::string(AMBIGZSL_TEST_DATA_DIR) + "/published_scores.csv";
  const fs::path out = scratch.path() / "agg";

  RunResult tr = run_cli(scratch.path(), "aggregate --scores \"" + scores +
                                             "\" --reference CLSWGAN --setting ZSL-TR" +
                                             " --out \"" + out.string() + "\"");
  CHECK(tr.exit_code == 0);
  CHECK(tr.out.find("mNRG vs CLSWGAN (ZSL-TR, T1)") != std::string::npos);
  CHECK(has_line_with(tr.out, "Ours", "22.7"));
  CHECK(has_line_with(tr.out, "TF-VAEGAN", "21.9"));
  CHECK(has_line_with(tr.out, "GFZSL", "6.8"));
  CHECK(has_line_with(tr.out, "DSRL", "-6.3"));

  for (const char* name : {"aggregate.json", "aggregate.txt", "manifest.json"}) {
    CAPTURE(name);
    CHECK(fs::exists(out / name));
  }
  const json doc = json::parse(read_file(out / "aggregate.json"));
  CHECK(doc.at("methods").at("Ours").at("mnrg").get<double>() ==
        doctest::Approx(22.7).epsilon(1e-9));
  CHECK(doc.at("methods").at("Ours").at("gains").size() == 4);

  RunResult in = run_cli(scratch.path(), "aggregate --scores \"" + scores +
                                             "\" --reference CLSWGAN --setting ZSL-IN");
  CHECK(in.exit_code == 0);
  CHECK(has_line_with(in.out, "f-VAEGAN-D2", "3.3"));
  CHECK(has_line_with(in.out, "Ours", "3.8"));

  // GZSL defaults to the harmonic-mean column; a method reported on a
  // subset of the datasets is aggregated over that subset only.
  RunResult gzsl = run_cli(scratch.path(), "aggregate --scores \"" + scores +
                                               "\" --reference CLSWGAN --setting GZSL-IN");
  CHECK(gzsl.exit_code == 0);
  CHECK(gzsl.out.find("(GZSL-IN, H)") != std::string::npos);
  CHECK(has_line_with(gzsl.out, "Chou21", "-4.5"));
  CHECK(has_line_with(gzsl.out, "Ours", "5.6"));

  RunResult missing = run_cli(scratch.path(), "aggregate --scores \"" + scores +
                                                  "\" --reference Nobody --setting ZSL-IN");
  CHECK(missing.exit_code == 1);
  CHECK(missing.err.find("no ZSL-IN/T1 rows for method 'Nobody'") != std::string::npos);
}

TEST_CASE("ablate-pool trains one model per grid point") {
  testutil::ScratchDir scratch("cli_ablate");
  const fs::path data = scratch.path() / "data";
  const fs::path out = scratch.path() / "grid";
  const fs::path config = write_tiny_config(scratch.path());

  REQUIRE(run_cli(scratch.path(), tiny_gen_args(data, 9)).exit_code == 0);
  RunResult result = run_cli(scratch.path(), "ablate-pool --data \"" + data.string() +
                                                 "\" --out \"" + out.string() +
                                                 "\" --config \"" + config.string() +
                                                 "\" --seed 4",
                             "AMBIGZSL_LOG_LEVEL=error");
  CHECK(result.exit_code == 0);
  CHECK(result.err.empty());

  for (const char* point : {"both", "seen", "unseen"}) {
    CAPTURE(point);
    CHECK(has_line_with(result.out, point, "."));
  }
  const json report = json::parse(read_file(out / "report.json"));
  REQUIRE(report.at("grid").size() == 3);
  CHECK(report.at("grid")[0].at("pool") == "both");
  CHECK(report.at("grid")[1].at("seed") != report.at("grid")[2].at("seed"));

  const auto score_lines = lines_of(read_file(out / "scores.csv"));
  CHECK(score_lines.size() == 13);  // header plus three points of T1, u, s, H
  const json manifest = json::parse(read_file(out / "manifest.json"));
  CHECK(manifest.at("command") == "ablate-pool");
  CHECK(manifest.at("args").at("grid").size() == 3);
}

TEST_CASE("log level variable silences informational output") {
  testutil::ScratchDir scratch("cli_log");
  const fs::path loud = scratch.path() / "loud";
  const fs::path quiet = scratch.path() / "quiet";

  RunResult noisy = run_cli(scratch.path(), tiny_gen_args(loud, 2));
  CHECK(noisy.err.find("[ambigzsl:info]") != std::string::npos);

  RunResult silent =
      run_cli(scratch.path(), tiny_gen_args(quiet, 2), "AMBIGZSL_LOG_LEVEL=error");
  CHECK(silent.err.empty());
}
