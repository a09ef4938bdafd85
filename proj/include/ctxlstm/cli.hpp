// SPDX-License-Identifier: Apache-2.0
//
// Run configuration and the command-line front end.
//
// Config files are JSON objects with "config_version": 1. Every key is
// optional; absent keys take the defaults shown by --print-config. Unknown
// keys are rejected. Relative paths resolve against the config file's
// directory. CTXLSTM_OUTPUT_DIR, when set, replaces output_dir.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctxlstm/data.hpp"
#include "ctxlstm/model.hpp"
#include "ctxlstm/training.hpp"

namespace ctxlstm {

inline constexpr int kConfigVersion = 1;

struct RunConfig {
  ModelSpec model;
  TrainConfig train;
  SyntheticTaskSpec synth;
  std::filesystem::path synth_dir = "synthetic";
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path output_dir = "run";
};

// Throws ConfigError naming the offending key.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_json(const RunConfig& cfg);

// The model section alone; stored inside checkpoints.
std::string model_spec_json(const ModelSpec& spec);
ModelSpec parse_model_spec(const std::string& json_text);

std::string model_kind_name(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);
std::string junction_order_name(JunctionOrder order);
JunctionOrder parse_junction_order(const std::string& name);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  bool no_pool = false;
  std::optional<JunctionOrder> junction_order;
  std::optional<ModelKind> model;
};

void apply_overrides(RunConfig& cfg, const Overrides& o);

// Seeds model initialization from the run seed.
std::unique_ptr<SequenceClassifier> init_model(const ModelSpec& spec, std::uint64_t seed);

// Process exit codes.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitData = 3, kExitNumeric = 4 };

// Parses argv and runs one subcommand; errors are reported on err and
// mapped to ExitCode values.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctxlstm
