// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "ctxlstm/cli.hpp"
#include "ctxlstm/errors.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace ctxlstm;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json toy_config() {
  return {{"config_version", 1},
          {"model",
           {{"kind", "context-lstm"},
            {"context_lstm",
             {{"input_dim", 4}, {"hidden", 5}, {"blocks", 3}, {"layers_per_block", 1}, {"fc1_out", 6}, {"num_classes", 3}}},
            {"baseline", {{"input_dim", 4}, {"hidden", 5}, {"layers", 1}, {"fc1_out", 6}, {"num_classes", 3}}}}},
          {"train", {{"batch_size", 8}, {"epochs", 3}, {"time_window", 8}, {"seed", 3}, {"learning_rate", 0.01}}},
          {"synth", {{"num_classes", 3}, {"dim", 4}, {"time", 10}, {"samples_per_class", 8}, {"seed", 4}, {"out_dir", "data"}}},
          {"data", {{"train_manifest", "data/train.tsv"}, {"test_manifest", "data/test.tsv"}}},
          {"output_dir", "run"}};
}

struct Workspace {
  test::TempDir dir{"cli"};
  std::string config;
  explicit Workspace(const nlohmann::json& cfg = toy_config()) {
    unsetenv("CTXLSTM_OUTPUT_DIR");
    write(cfg);
  }
  void write(const nlohmann::json& cfg) {
    config = (dir / "config.json").string();
    std::ofstream(config) << cfg.dump(2);
  }
  CliResult synth() { return cli({"synth", "--config", config}); }
};

}  // namespace

TEST_CASE("synth is deterministic and reports the oracle") {
  Workspace w;
  const CliResult r = w.synth();
  REQUIRE(r.code == 0);
  CHECK(r.out.find("samples: 24") != std::string::npos);
  CHECK(r.out.find("oracle_accuracy: ") != std::string::npos);
  const std::string train_a = test::read_text(w.dir / "data/train.tsv");
  const std::string sample_a = test::read_text(w.dir / "data/samples/c002_00007.clsf");
  REQUIRE(cli({"synth", "--config", w.config}).code == 0);
  CHECK(test::read_text(w.dir / "data/train.tsv") == train_a);
  CHECK(test::read_text(w.dir / "data/samples/c002_00007.clsf") == sample_a);

  const fs::path other = w.dir / "other";
  REQUIRE(cli({"synth", "--config", w.config, "--out", other.string(), "--seed", "5"}).code == 0);
  CHECK(test::read_text(other / "samples/c002_00007.clsf") != sample_a);
}

TEST_CASE("print-config shows the resolved configuration") {
  Workspace w;
  const CliResult r = cli({"train", "--config", w.config, "--print-config", "--epochs", "9", "--no-pool",
                           "--junction-order", "bn-relu", "--model", "baseline"});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["train"]["epochs"] == 9);
  CHECK(j["model"]["kind"] == "baseline");
  CHECK(j["model"]["context_lstm"]["junction"]["pool"] == false);
  CHECK(j["model"]["context_lstm"]["junction"]["order"] == "bn-relu");
  CHECK(j["model"]["context_lstm"]["hidden"] == 5);
  CHECK(fs::path(j["output_dir"].get<std::string>()) == w.dir / "run");
  CHECK_FALSE(fs::exists(w.dir / "run"));

  const RunConfig round = parse_run_config(r.out, "");
  CHECK(run_config_json(round) + "\n" == r.out);
  CHECK(cli({"train", "--print-config"}).code == 0);
}

TEST_CASE("config errors exit with 2") {
  Workspace w;
  auto cfg = toy_config();
  cfg["train"]["mystery"] = 1;
  w.write(cfg);
  CliResult r = cli({"train", "--config", w.config});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("mystery") != std::string::npos);

  cfg = toy_config();
  cfg["config_version"] = 2;
  w.write(cfg);
  CHECK(cli({"train", "--config", w.config}).code == kExitConfig);

  std::ofstream(w.config) << "{ not json";
  CHECK(cli({"train", "--config", w.config}).code == kExitConfig);
  CHECK(cli({"train", "--config", (w.dir / "absent.json").string()}).code == kExitConfig);
  CHECK(cli({"train", "--junction-order", "sideways"}).code == kExitConfig);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);
  CHECK(cli({"--help"}).code == kExitOk);

  cfg = toy_config();
  cfg["model"]["context_lstm"]["hidden"] = 0;
  w.write(cfg);
  CHECK_THROWS_AS(load_run_config(w.config).model.context.validate(), ConfigError);
}

TEST_CASE("train writes metrics, config and checkpoints reproducibly") {
  Workspace w;
  REQUIRE(w.synth().code == 0);
  CliResult r = cli({"train", "--config", w.config});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("epoch 3/3 loss") != std::string::npos);
  CHECK(r.out.find("best_test_acc: ") != std::string::npos);
  for (const char* f : {"metrics.csv", "config.json", "last.ckpt", "best.ckpt", "final.ckpt"}) {
    CHECK(fs::exists(w.dir / "run" / f));
  }
  const std::string metrics = test::read_text(w.dir / "run/metrics.csv");
  std::size_t lines = 0;
  for (char c : metrics) lines += c == '\n';
  CHECK(lines == 4);
  CHECK(metrics.rfind("epoch,train_loss,train_acc,test_acc,wall_seconds\n", 0) == 0);

  REQUIRE(cli({"train", "--config", w.config, "--quiet"}).code == 0);
  CHECK(test::read_text(w.dir / "run/metrics.csv") == metrics);
  CHECK(test::read_text(w.dir / "run/final.ckpt").size() > 0);

  const std::string final_a = test::read_text(w.dir / "run/final.ckpt");
  REQUIRE(cli({"train", "--config", w.config, "--quiet"}).code == 0);
  CHECK(test::read_text(w.dir / "run/final.ckpt") == final_a);
}

TEST_CASE("missing data exits with 3 and creates nothing") {
  Workspace w;
  const CliResult r = cli({"train", "--config", w.config});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("train.tsv") != std::string::npos);
  CHECK_FALSE(fs::exists(w.dir / "run"));
  REQUIRE(w.synth().code == 0);
  CHECK(cli({"train", "--config", w.config, "--resume", (w.dir / "nope.ckpt").string()}).code == kExitData);
  CHECK_FALSE(fs::exists(w.dir / "run"));
}

TEST_CASE("resume continues to the same result") {
  Workspace w;
  REQUIRE(w.synth().code == 0);
  auto cfg = toy_config();
  cfg["train"]["epochs"] = 4;
  cfg["output_dir"] = "full";
  w.write(cfg);
  REQUIRE(cli({"train", "--config", w.config, "--quiet"}).code == 0);

  cfg["output_dir"] = "split";
  w.write(cfg);
  REQUIRE(cli({"train", "--config", w.config, "--quiet", "--epochs", "2"}).code == 0);
  const std::string ckpt = (w.dir / "split/last.ckpt").string();
  CHECK(cli({"train", "--config", w.config, "--quiet", "--epochs", "1", "--resume", ckpt}).code == kExitConfig);
  CHECK(cli({"train", "--config", w.config, "--quiet", "--seed", "77", "--resume", ckpt}).code == kExitConfig);
  CHECK(cli({"train", "--config", w.config, "--quiet", "--no-pool", "--resume", ckpt}).code == kExitConfig);
  REQUIRE(cli({"train", "--config", w.config, "--quiet", "--resume", ckpt}).code == 0);
  CHECK(test::read_text(w.dir / "split/metrics.csv") == test::read_text(w.dir / "full/metrics.csv"));
  CHECK(test::read_text(w.dir / "split/final.ckpt") == test::read_text(w.dir / "full/final.ckpt"));
}

TEST_CASE("eval is repeatable and consistent with per-class accuracy") {
  Workspace w;
  REQUIRE(w.synth().code == 0);
  REQUIRE(cli({"train", "--config", w.config, "--quiet"}).code == 0);
  const CliResult a = cli({"eval", "--config", w.config});
  REQUIRE(a.code == 0);
  const CliResult b = cli({"eval", "--config", w.config});
  CHECK(a.out == b.out);
  const double top1 = std::stod(a.out.substr(a.out.find("top1: ") + 6));
  std::istringstream csv(test::read_text(w.dir / "run/per_class_accuracy.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "class,name,samples,correct,accuracy");
  double samples = 0, correct = 0, weighted = 0;
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string cls, name, n, k, acc;
    std::getline(row, cls, ',');
    std::getline(row, name, ',');
    std::getline(row, n, ',');
    std::getline(row, k, ',');
    std::getline(row, acc, ',');
    samples += std::stod(n);
    correct += std::stod(k);
    weighted += std::stod(acc) * std::stod(n);
  }
  CHECK(samples == 6);
  CHECK(std::abs(correct / samples - top1) <= 5e-7);
  CHECK(std::abs(weighted / samples - correct / samples) <= 1e-12);

  const fs::path all = w.dir / "data/manifest.tsv";
  const CliResult whole = cli({"eval", "--config", w.config, "--manifest", all.string(), "--out",
                               (w.dir / "all.csv").string()});
  CHECK(whole.code == 0);
  CHECK(whole.out.find("samples: 24") != std::string::npos);
  CHECK(fs::exists(w.dir / "all.csv"));
}

TEST_CASE("eval reports dimension mismatches with expected and found values") {
  Workspace w;
  REQUIRE(w.synth().code == 0);
  REQUIRE(cli({"train", "--config", w.config, "--quiet", "--epochs", "1"}).code == 0);
  const fs::path other = w.dir / "wide";
  REQUIRE(cli({"synth", "--config", w.config, "--out", other.string(), "--dim", "6"}).code == 0);
  const CliResult r = cli({"eval", "--config", w.config, "--manifest", (other / "test.tsv").string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("expects 4") != std::string::npos);
  CHECK(r.err.find("has 6") != std::string::npos);
  CHECK(cli({"eval", "--config", w.config, "--checkpoint", (w.dir / "none.ckpt").string()}).code == kExitData);
}

TEST_CASE("training against the wrong feature dim fails cleanly") {
  Workspace w;
  auto cfg = toy_config();
  cfg["synth"]["dim"] = 5;
  w.write(cfg);
  REQUIRE(w.synth().code == 0);
  const CliResult r = cli({"train", "--config", w.config});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("feature dim 5") != std::string::npos);
  CHECK_FALSE(fs::exists(w.dir / "run"));
}

TEST_CASE("compare trains three variants and both junction orders run") {
  Workspace w;
  REQUIRE(w.synth().code == 0);
  const CliResult r = cli({"compare", "--config", w.config, "--epochs", "1"});
  REQUIRE(r.code == 0);
  std::istringstream csv(test::read_text(w.dir / "run/compare.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "variant,best_test_acc,wall_seconds,params,flops");
  std::vector<std::string> names;
  std::vector<double> flops;
  while (std::getline(csv, line)) {
    names.push_back(line.substr(0, line.find(',')));
    flops.push_back(std::stod(line.substr(line.rfind(',') + 1)));
  }
  CHECK(names == std::vector<std::string>{"baseline", "ctx-no-pool", "ctx"});
  REQUIRE(flops.size() == 3);
  CHECK(flops[2] < flops[1]);

  for (const char* order : {"relu-bn", "bn-relu"}) {
    const CliResult t = cli({"train", "--config", w.config, "--quiet", "--epochs", "1", "--junction-order", order});
    CHECK(t.code == 0);
    const auto saved = nlohmann::json::parse(test::read_text(w.dir / "run/config.json"));
    CHECK(saved["model"]["context_lstm"]["junction"]["order"] == order);
  }
}

TEST_CASE("output directory override from the environment") {
  Workspace w;
  REQUIRE(w.synth().code == 0);
  const fs::path redirected = w.dir / "elsewhere";
  setenv("CTXLSTM_OUTPUT_DIR", redirected.c_str(), 1);
  const CliResult r = cli({"train", "--config", w.config, "--quiet", "--epochs", "1"});
  unsetenv("CTXLSTM_OUTPUT_DIR");
  CHECK(r.code == 0);
  CHECK(fs::exists(redirected / "metrics.csv"));
  CHECK_FALSE(fs::exists(w.dir / "run"));
}

TEST_CASE("gradcheck subcommand") {
  const CliResult r = cli({"gradcheck"});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS lstm_cell") != std::string::npos);
  CHECK(r.out.find("FAIL") == std::string::npos);
}
