// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "ctxlstm/binary_io.hpp"
#include "ctxlstm/cli.hpp"
#include "ctxlstm/errors.hpp"
#include "ctxlstm/gradcheck_suite.hpp"

namespace ctxlstm {

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config;
  bool print_config = false;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  bool no_pool = false;
  std::string junction_order;
  std::string model;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;
};

void add_common(CLI::App* sub, CommonArgs& a) {
  sub->add_option("--config", a.config, "JSON run configuration");
  sub->add_flag("--print-config", a.print_config, "Print the effective configuration and exit");
  a.seed_opt = sub->add_option("--seed", a.seed, "Override the run seed");
  a.epochs_opt = sub->add_option("--epochs", a.epochs, "Override the epoch count")->check(CLI::PositiveNumber);
  sub->add_flag("--no-pool", a.no_pool, "Disable temporal max pooling in the junctions");
  sub->add_option("--junction-order", a.junction_order, "Junction order")->check(CLI::IsMember({"relu-bn", "bn-relu"}));
  sub->add_option("--model", a.model, "Model family")->check(CLI::IsMember({"context-lstm", "baseline"}));
}

RunConfig resolve_config(const CommonArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  Overrides o;
  if (a.seed_opt->count() > 0) o.seed = a.seed;
  if (a.epochs_opt->count() > 0) o.epochs = a.epochs;
  o.no_pool = a.no_pool;
  if (!a.junction_order.empty()) o.junction_order = parse_junction_order(a.junction_order);
  if (!a.model.empty()) o.model = parse_model_kind(a.model);
  apply_overrides(cfg, o);
  return cfg;
}

void validate_model(const ModelSpec& spec) {
  if (spec.kind == ModelKind::context_lstm) {
    spec.context.validate();
  } else {
    spec.baseline.validate();
  }
}

Dataset load_split(const fs::path& manifest, const char* key) {
  if (manifest.empty()) throw ConfigError(std::string("data.") + key + " is not set");
  if (!fs::exists(manifest)) throw DataError(std::string(key) + " '" + manifest.string() + "' does not exist");
  return load_dataset(load_manifest(manifest));
}

// Removes the files a command created unless commit() is called, so a
// failed run leaves nothing half-written behind.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    if (!fs::exists(dir_, ec)) {
      if (!fs::create_directories(dir_, ec) || ec) {
        throw IoError("cannot create output directory '" + dir_.string() + "': " + ec.message());
      }
      created_dir_ = true;
    }
    const fs::path probe = dir_ / ".write_probe";
    {
      std::ofstream p(probe);
      if (!p) {
        cleanup();
        throw IoError("output directory '" + dir_.string() + "' is not writable");
      }
    }
    fs::remove(probe, ec);
  }
  ~OutputGuard() {
    if (!committed_) cleanup();
  }
  OutputGuard(const OutputGuard&) = delete;
  OutputGuard& operator=(const OutputGuard&) = delete;

  fs::path track(const std::string& name) {
    fs::path p = dir_ / name;
    created_.push_back(p);
    return p;
  }
  void commit() { committed_ = true; }

 private:
  void cleanup() {
    std::error_code ec;
    for (const auto& p : created_) fs::remove(p, ec);
    if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
  }

  fs::path dir_;
  bool created_dir_ = false;
  bool committed_ = false;
  std::vector<fs::path> created_;
};

void write_text(const fs::path& path, const std::string& text) {
  write_file_bytes(path, {reinterpret_cast<const unsigned char*>(text.data()), text.size()});
}

bool same_run(const TrainConfig& a, const TrainConfig& b) {
  return a.learning_rate == b.learning_rate && a.batch_size == b.batch_size && a.adam_beta1 == b.adam_beta1 &&
         a.adam_beta2 == b.adam_beta2 && a.adam_eps == b.adam_eps && a.seed == b.seed &&
         a.eval_every == b.eval_every && a.time_window == b.time_window && a.record_wall_time == b.record_wall_time;
}

// Keeps the header and the rows of the first `epochs` epochs.
std::string truncated_metrics(const fs::path& path, std::uint64_t epochs) {
  std::string kept = CsvMetricSink::header() + "\n";
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::uint64_t rows = 0;
  while (rows < epochs && std::getline(in, line)) {
    kept += line + "\n";
    ++rows;
  }
  if (rows != epochs) {
    throw DataError("metrics file '" + path.string() + "' has " + std::to_string(rows) +
                    " rows but the checkpoint is at epoch " + std::to_string(epochs));
  }
  return kept;
}

// ---- synth ------------------------------------------------------------

struct SynthArgs {
  CommonArgs common;
  std::string out;
  double noise = 0.0;
  std::size_t classes = 0, samples = 0, dim = 0, time = 0;
  CLI::Option *noise_opt = nullptr, *classes_opt = nullptr, *samples_opt = nullptr, *dim_opt = nullptr,
              *time_opt = nullptr;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  RunConfig cfg = resolve_config(a.common);
  if (a.noise_opt->count()) cfg.synth.noise_sigma = a.noise;
  if (a.classes_opt->count()) cfg.synth.num_classes = a.classes;
  if (a.samples_opt->count()) cfg.synth.samples_per_class = a.samples;
  if (a.dim_opt->count()) cfg.synth.dim = a.dim;
  if (a.time_opt->count()) cfg.synth.time = a.time;
  if (!a.out.empty()) cfg.synth_dir = a.out;
  if (a.common.print_config) {
    out << run_config_json(cfg) << '\n';
    return kExitOk;
  }
  cfg.synth.validate();
  const SyntheticDataset ds = generate_synthetic(cfg.synth, cfg.synth_dir);
  const double oracle = nearest_prototype_accuracy(ds.prototypes, load_dataset(ds.all));
  char acc[32];
  std::snprintf(acc, sizeof acc, "%.6f", oracle);
  out << "samples: " << ds.all.entries.size() << " (" << ds.all.num_classes() << " classes)\n"
      << "manifest: " << (cfg.synth_dir / "manifest.tsv").string() << '\n'
      << "train: " << (cfg.synth_dir / "train.tsv").string() << " (" << ds.train.entries.size() << ")\n"
      << "test: " << (cfg.synth_dir / "test.tsv").string() << " (" << ds.test.entries.size() << ")\n"
      << "oracle_accuracy: " << acc << '\n';
  return kExitOk;
}

// ---- train ------------------------------------------------------------

struct TrainArgs {
  CommonArgs common;
  std::string resume;
  std::size_t checkpoint_every = 1;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  RunConfig cfg = resolve_config(a.common);
  if (a.common.print_config) {
    out << run_config_json(cfg) << '\n';
    return kExitOk;
  }
  validate_model(cfg.model);
  cfg.train.validate();

  std::optional<Checkpoint> resume;
  if (!a.resume.empty()) {
    if (!fs::exists(a.resume)) throw DataError("checkpoint '" + a.resume + "' does not exist");
    resume = load_checkpoint(a.resume);
  }
  const Dataset train_set = load_split(cfg.train_manifest, "train_manifest");
  const Dataset test_set = load_split(cfg.test_manifest, "test_manifest");
  auto model = init_model(cfg.model, cfg.train.seed);
  Trainer trainer(*model, train_set, test_set, cfg.train);
  const std::string model_config = model_spec_json(cfg.model);
  if (resume) {
    if (resume->model_config != model_config) {
      throw ConfigError("checkpoint was written for a different model configuration");
    }
    if (!same_run(resume->train, cfg.train)) {
      throw ConfigError("checkpoint was written with different training settings");
    }
    if (resume->epoch > cfg.train.epochs) {
      throw ConfigError("checkpoint is at epoch " + std::to_string(resume->epoch) + ", beyond the requested " +
                        std::to_string(cfg.train.epochs));
    }
    trainer.restore(*resume);
  }

  OutputGuard guard(cfg.output_dir);
  const fs::path metrics = cfg.output_dir / "metrics.csv";
  if (resume) {
    write_text(metrics, truncated_metrics(metrics, resume->epoch));
  } else {
    guard.track("metrics.csv");
    std::error_code ec;
    fs::remove(metrics, ec);
  }
  write_text(guard.track("config.json"), run_config_json(cfg) + "\n");
  const fs::path last = guard.track("last.ckpt");
  const fs::path best = guard.track("best.ckpt");
  const fs::path final_path = guard.track("final.ckpt");

  CsvMetricSink sink(metrics);
  double best_seen = resume ? resume->best_test_acc : -1.0;
  bool have_best = resume && fs::exists(best);
  trainer.run(&sink, 0, [&](const EpochRecord& r) {
    if (!a.quiet) {
      char line[160];
      std::snprintf(line, sizeof line, "epoch %zu/%zu loss %.6f train_acc %.4f test_acc %.4f", r.epoch,
                    cfg.train.epochs, r.train_loss, r.train_acc, r.test_acc);
      out << line << '\n';
    }
    if (!have_best || trainer.best_test_acc() > best_seen) {
      save_checkpoint(best, trainer.checkpoint(model_config));
      best_seen = trainer.best_test_acc();
      have_best = true;
    }
    if (a.checkpoint_every > 0 && r.epoch % a.checkpoint_every == 0) {
      save_checkpoint(last, trainer.checkpoint(model_config));
    }
  });
  save_checkpoint(final_path, trainer.checkpoint(model_config));
  guard.commit();
  char summary[96];
  std::snprintf(summary, sizeof summary, "best_test_acc: %.6f", trainer.best_test_acc());
  out << summary << '\n' << "output: " << cfg.output_dir.string() << '\n';
  return kExitOk;
}

// ---- eval -------------------------------------------------------------

struct EvalArgs {
  CommonArgs common;
  std::string checkpoint;
  std::string manifest;
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  RunConfig cfg = resolve_config(a.common);
  if (a.common.print_config) {
    out << run_config_json(cfg) << '\n';
    return kExitOk;
  }
  const fs::path ckpt_path = a.checkpoint.empty() ? cfg.output_dir / "best.ckpt" : fs::path(a.checkpoint);
  const fs::path manifest_path = a.manifest.empty() ? cfg.test_manifest : fs::path(a.manifest);
  if (!fs::exists(ckpt_path)) throw DataError("checkpoint '" + ckpt_path.string() + "' does not exist");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const ModelSpec spec = parse_model_spec(ckpt.model_config);
  auto model = init_model(spec, 0);
  apply_checkpoint_weights(ckpt, *model);

  const Dataset data = load_split(manifest_path, "manifest");
  if (data.dim != model->input_dim()) {
    throw DataError("feature dim mismatch: model expects " + std::to_string(model->input_dim()) + ", data has " +
                    std::to_string(data.dim));
  }
  if (data.num_classes() != model->num_classes()) {
    throw DataError("class count mismatch: model expects " + std::to_string(model->num_classes()) +
                    ", manifest lists " + std::to_string(data.num_classes()));
  }
  const EvalResult result = evaluate(*model, data, ckpt.train.batch_size, ckpt.train.time_window);

  std::vector<std::size_t> total(data.num_classes(), 0), correct(data.num_classes(), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t label = data.items[i].label;
    total[label] += 1;
    correct[label] += result.predictions[i] == label ? 1 : 0;
  }
  std::ostringstream csv;
  csv << "class,name,samples,correct,accuracy\n";
  for (std::size_t c = 0; c < data.num_classes(); ++c) {
    char acc[32];
    std::snprintf(acc, sizeof acc, "%.17g",
                  total[c] ? static_cast<double>(correct[c]) / static_cast<double>(total[c]) : 0.0);
    csv << c << ',' << data.class_names[c] << ',' << total[c] << ',' << correct[c] << ',' << acc << '\n';
  }
  const fs::path csv_path = a.out.empty() ? ckpt_path.parent_path() / "per_class_accuracy.csv" : fs::path(a.out);
  write_text(csv_path, csv.str());

  char line[64];
  std::snprintf(line, sizeof line, "top1: %.6f", result.accuracy);
  out << line << '\n' << "samples: " << data.size() << '\n' << "per_class: " << csv_path.string() << '\n';
  return kExitOk;
}

// ---- gradcheck --------------------------------------------------------

int cmd_gradcheck(const CommonArgs& a, std::ostream& out) {
  if (a.print_config) {
    out << run_config_json(resolve_config(a)) << '\n';
    return kExitOk;
  }
  const auto reports = run_grad_cases(standard_grad_cases());
  for (const auto& r : reports) {
    char line[128];
    std::snprintf(line, sizeof line, "%-4s %-26s max_rel_err %.3e", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                  r.max_error);
    out << line << '\n';
  }
  const bool ok = all_passed(reports);
  out << (ok ? "all gradients within " : "gradient check failed; tolerance ") << kGradTolerance << '\n';
  return ok ? kExitOk : kExitNumeric;
}

// ---- compare ----------------------------------------------------------

int cmd_compare(const CommonArgs& a, std::ostream& out) {
  RunConfig cfg = resolve_config(a);
  if (a.print_config) {
    out << run_config_json(cfg) << '\n';
    return kExitOk;
  }
  cfg.train.validate();
  struct Variant {
    const char* name;
    ModelSpec spec;
  };
  std::vector<Variant> variants{{"baseline", cfg.model}, {"ctx-no-pool", cfg.model}, {"ctx", cfg.model}};
  variants[0].spec.kind = ModelKind::baseline;
  variants[1].spec.kind = ModelKind::context_lstm;
  variants[1].spec.context.junction.pool_enabled = false;
  variants[2].spec.kind = ModelKind::context_lstm;
  variants[2].spec.context.junction.pool_enabled = true;
  for (const auto& v : variants) validate_model(v.spec);

  const Dataset train_set = load_split(cfg.train_manifest, "train_manifest");
  const Dataset test_set = load_split(cfg.test_manifest, "test_manifest");
  std::vector<std::unique_ptr<SequenceClassifier>> models;
  for (const auto& v : variants) {
    models.push_back(init_model(v.spec, cfg.train.seed));
    Trainer check(*models.back(), train_set, test_set, cfg.train);
  }

  OutputGuard guard(cfg.output_dir);
  const fs::path csv_path = guard.track("compare.csv");
  std::ostringstream csv;
  csv << "variant,best_test_acc,wall_seconds,params,flops\n";
  for (std::size_t i = 0; i < variants.size(); ++i) {
    Trainer trainer(*models[i], train_set, test_set, cfg.train);
    const auto started = std::chrono::steady_clock::now();
    trainer.run(nullptr);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    char row[256];
    std::snprintf(row, sizeof row, "%s,%.17g,%.3f,%zu,%.0f", variants[i].name, trainer.best_test_acc(), wall,
                  models[i]->count_params(), models[i]->flop_estimate(cfg.train.time_window));
    csv << row << '\n';
    out << row << '\n';
  }
  write_text(csv_path, csv.str());
  guard.commit();
  out << "output: " << csv_path.string() << '\n';
  return kExitOk;
}

int report(std::ostream& err, const std::exception& e, int code) {
  err << "error: " << e.what() << '\n';
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-LSTM sequence classification toolkit", "ctxlstm"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic temporal-prototype dataset");
  add_common(synth_cmd, synth.common);
  synth_cmd->add_option("--out", synth.out, "Output directory");
  synth.noise_opt = synth_cmd->add_option("--noise", synth.noise, "Noise standard deviation");
  synth.classes_opt = synth_cmd->add_option("--classes", synth.classes, "Number of classes");
  synth.samples_opt = synth_cmd->add_option("--samples-per-class", synth.samples, "Samples per class");
  synth.dim_opt = synth_cmd->add_option("--dim", synth.dim, "Feature dimension");
  synth.time_opt = synth_cmd->add_option("--time", synth.time, "Sequence length");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write metrics and checkpoints");
  add_common(train_cmd, train.common);
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint");
  train_cmd->add_option("--checkpoint-every", train.checkpoint_every, "Write last.ckpt every N epochs (0 = never)");
  train_cmd->add_flag("--quiet", train.quiet, "Do not print per-epoch progress");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  add_common(eval_cmd, eval.common);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file (default: <output_dir>/best.ckpt)");
  eval_cmd->add_option("--manifest", eval.manifest, "Manifest to evaluate (default: data.test_manifest)");
  eval_cmd->add_option("--out", eval.out, "Per-class accuracy CSV path");

  CommonArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Verify every backward rule against finite differences");
  add_common(grad_cmd, grad);

  CommonArgs compare;
  auto* compare_cmd = app.add_subcommand("compare", "Train baseline, ctx-no-pool and ctx under one budget");
  add_common(compare_cmd, compare);

  std::vector<const char*> argv{"ctxlstm"};
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth, out);
    if (train_cmd->parsed()) return cmd_train(train, out);
    if (eval_cmd->parsed()) return cmd_eval(eval, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(grad, out);
    if (compare_cmd->parsed()) return cmd_compare(compare, out);
  } catch (const ConfigError& e) {
    return report(err, e, kExitConfig);
  } catch (const DataError& e) {
    return report(err, e, kExitData);
  } catch (const DimensionError& e) {
    return report(err, e, kExitData);
  } catch (const NumericError& e) {
    return report(err, e, kExitNumeric);
  } catch (const std::exception& e) {
    return report(err, e, kExitFailure);
  }
  return kExitFailure;
}

}  // namespace ctxlstm
