// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "ctxlstm/cli.hpp"
#include "ctxlstm/errors.hpp"
#include "json.hpp"

namespace ctxlstm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 0x494E4954ULL;  // "INIT"

// Typed, strict reader over one JSON object.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("'" + where_ + "' must be an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    for (const auto& [key, value] : j_.items()) {
      bool known = false;
      for (const char* k : keys) known = known || key == k;
      if (!known) throw ConfigError("unknown key '" + key + "' in '" + where_ + "'");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void get(const char* key, std::size_t& out) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError("'" + path(key) + "' must be a non-negative integer");
    }
    out = v.get<std::size_t>();
  }
  void get(const char* key, std::uint64_t& out, int) const {
    std::size_t tmp = out;
    get(key, tmp);
    out = tmp;
  }
  void get(const char* key, double& out) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError("'" + path(key) + "' must be a number");
    out = v.get<double>();
  }
  void get(const char* key, bool& out) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError("'" + path(key) + "' must be true or false");
    out = v.get<bool>();
  }
  void get(const char* key, std::string& out) const {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError("'" + path(key) + "' must be a string");
    out = v.get<std::string>();
  }

 private:
  const json& j_;
  std::string where_;
};

std::string readout_name(Readout r) { return r == Readout::last_step ? "last" : "mean"; }

Readout parse_readout(const std::string& s) {
  if (s == "last") return Readout::last_step;
  if (s == "mean") return Readout::mean_over_time;
  throw ConfigError("readout must be 'last' or 'mean', got '" + s + "'");
}

json context_json(const ContextLSTMConfig& c) {
  return {{"input_dim", c.input_dim},
          {"hidden", c.hidden},
          {"blocks", c.blocks},
          {"layers_per_block", c.layers_per_block},
          {"bidirectional", c.bidirectional},
          {"junction",
           {{"order", junction_order_name(c.junction.order)},
            {"pool", c.junction.pool_enabled},
            {"pool_kernel", c.junction.pool_kernel},
            {"pool_stride", c.junction.pool_stride}}},
          {"dropout", c.dropout_rate},
          {"fc1_out", c.fc1_out},
          {"num_classes", c.num_classes},
          {"readout", readout_name(c.readout)},
          {"bn_momentum", c.bn_momentum},
          {"bn_eps", c.bn_eps}};
}

void read_context(const Section& s, ContextLSTMConfig& c) {
  s.allow({"input_dim", "hidden", "blocks", "layers_per_block", "bidirectional", "junction", "dropout", "fc1_out",
           "num_classes", "readout", "bn_momentum", "bn_eps"});
  s.get("input_dim", c.input_dim);
  s.get("hidden", c.hidden);
  s.get("blocks", c.blocks);
  s.get("layers_per_block", c.layers_per_block);
  s.get("bidirectional", c.bidirectional);
  s.get("dropout", c.dropout_rate);
  s.get("fc1_out", c.fc1_out);
  s.get("num_classes", c.num_classes);
  s.get("bn_momentum", c.bn_momentum);
  s.get("bn_eps", c.bn_eps);
  std::string readout = readout_name(c.readout);
  s.get("readout", readout);
  c.readout = parse_readout(readout);
  if (s.has("junction")) {
    Section j(s.raw("junction"), s.path("junction"));
    j.allow({"order", "pool", "pool_kernel", "pool_stride"});
    std::string order = junction_order_name(c.junction.order);
    j.get("order", order);
    c.junction.order = parse_junction_order(order);
    j.get("pool", c.junction.pool_enabled);
    j.get("pool_kernel", c.junction.pool_kernel);
    j.get("pool_stride", c.junction.pool_stride);
  }
}

json baseline_json(const BaselineConfig& c) {
  return {{"input_dim", c.input_dim}, {"hidden", c.hidden},           {"layers", c.layers},
          {"dropout", c.dropout_rate}, {"fc1_out", c.fc1_out},        {"num_classes", c.num_classes},
          {"readout", readout_name(c.readout)}};
}

void read_baseline(const Section& s, BaselineConfig& c) {
  s.allow({"input_dim", "hidden", "layers", "dropout", "fc1_out", "num_classes", "readout"});
  s.get("input_dim", c.input_dim);
  s.get("hidden", c.hidden);
  s.get("layers", c.layers);
  s.get("dropout", c.dropout_rate);
  s.get("fc1_out", c.fc1_out);
  s.get("num_classes", c.num_classes);
  std::string readout = readout_name(c.readout);
  s.get("readout", readout);
  c.readout = parse_readout(readout);
}

json model_json(const ModelSpec& m) {
  return {{"kind", model_kind_name(m.kind)}, {"context_lstm", context_json(m.context)},
          {"baseline", baseline_json(m.baseline)}};
}

void read_model(const Section& s, ModelSpec& m) {
  s.allow({"kind", "context_lstm", "baseline"});
  std::string kind = model_kind_name(m.kind);
  s.get("kind", kind);
  m.kind = parse_model_kind(kind);
  if (s.has("context_lstm")) read_context(Section(s.raw("context_lstm"), s.path("context_lstm")), m.context);
  if (s.has("baseline")) read_baseline(Section(s.raw("baseline"), s.path("baseline")), m.baseline);
}

json train_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size}, {"epochs", t.epochs},
          {"adam_beta1", t.adam_beta1},       {"adam_beta2", t.adam_beta2}, {"adam_eps", t.adam_eps},
          {"seed", t.seed},                   {"eval_every", t.eval_every}, {"time_window", t.time_window},
          {"record_wall_time", t.record_wall_time}};
}

void read_train(const Section& s, TrainConfig& t) {
  s.allow({"learning_rate", "batch_size", "epochs", "adam_beta1", "adam_beta2", "adam_eps", "seed", "eval_every",
           "time_window", "record_wall_time"});
  s.get("learning_rate", t.learning_rate);
  s.get("batch_size", t.batch_size);
  s.get("epochs", t.epochs);
  s.get("adam_beta1", t.adam_beta1);
  s.get("adam_beta2", t.adam_beta2);
  s.get("adam_eps", t.adam_eps);
  s.get("seed", t.seed, 0);
  s.get("eval_every", t.eval_every);
  s.get("time_window", t.time_window);
  s.get("record_wall_time", t.record_wall_time);
}

json synth_json(const SyntheticTaskSpec& y, const fs::path& dir) {
  return {{"num_classes", y.num_classes}, {"dim", y.dim},
          {"time", y.time},               {"samples_per_class", y.samples_per_class},
          {"noise_sigma", y.noise_sigma}, {"seed", y.seed},
          {"out_dir", dir.generic_string()}};
}

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void read_synth(const Section& s, SyntheticTaskSpec& y, fs::path& dir, const fs::path& base) {
  s.allow({"num_classes", "dim", "time", "samples_per_class", "noise_sigma", "seed", "out_dir"});
  s.get("num_classes", y.num_classes);
  s.get("dim", y.dim);
  s.get("time", y.time);
  s.get("samples_per_class", y.samples_per_class);
  s.get("noise_sigma", y.noise_sigma);
  s.get("seed", y.seed, 0);
  std::string out = dir.generic_string();
  s.get("out_dir", out);
  dir = s.has("out_dir") ? resolve(base, out) : fs::path(out);
}

json parse_text(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

std::string model_kind_name(ModelKind kind) { return kind == ModelKind::context_lstm ? "context-lstm" : "baseline"; }

ModelKind parse_model_kind(const std::string& name) {
  if (name == "context-lstm") return ModelKind::context_lstm;
  if (name == "baseline") return ModelKind::baseline;
  throw ConfigError("model must be 'context-lstm' or 'baseline', got '" + name + "'");
}

std::string junction_order_name(JunctionOrder order) {
  return order == JunctionOrder::relu_then_bn ? "relu-bn" : "bn-relu";
}

JunctionOrder parse_junction_order(const std::string& name) {
  if (name == "relu-bn") return JunctionOrder::relu_then_bn;
  if (name == "bn-relu") return JunctionOrder::bn_then_relu;
  throw ConfigError("junction order must be 'relu-bn' or 'bn-relu', got '" + name + "'");
}

RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir) {
  const json root = parse_text(json_text, "config");
  Section s(root, "");
  s.allow({"config_version", "model", "train", "data", "synth", "output_dir"});
  std::size_t version = kConfigVersion;
  s.get("config_version", version);
  if (version != static_cast<std::size_t>(kConfigVersion)) {
    throw ConfigError("unsupported config_version " + std::to_string(version) + " (expected " +
                      std::to_string(kConfigVersion) + ")");
  }
  RunConfig cfg;
  if (s.has("model")) read_model(Section(s.raw("model"), "model"), cfg.model);
  if (s.has("train")) read_train(Section(s.raw("train"), "train"), cfg.train);
  if (s.has("synth")) read_synth(Section(s.raw("synth"), "synth"), cfg.synth, cfg.synth_dir, base_dir);
  if (s.has("data")) {
    Section d(s.raw("data"), "data");
    d.allow({"train_manifest", "test_manifest"});
    std::string train, test;
    d.get("train_manifest", train);
    d.get("test_manifest", test);
    cfg.train_manifest = resolve(base_dir, train);
    cfg.test_manifest = resolve(base_dir, test);
  }
  if (s.has("output_dir")) {
    std::string out;
    s.get("output_dir", out);
    cfg.output_dir = resolve(base_dir, out);
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

std::string run_config_json(const RunConfig& cfg) {
  const json root = {{"config_version", kConfigVersion},
                     {"model", model_json(cfg.model)},
                     {"train", train_json(cfg.train)},
                     {"data",
                      {{"train_manifest", cfg.train_manifest.generic_string()},
                       {"test_manifest", cfg.test_manifest.generic_string()}}},
                     {"synth", synth_json(cfg.synth, cfg.synth_dir)},
                     {"output_dir", cfg.output_dir.generic_string()}};
  return root.dump(2);
}

std::string model_spec_json(const ModelSpec& spec) { return model_json(spec).dump(); }

ModelSpec parse_model_spec(const std::string& json_text) {
  ModelSpec spec;
  read_model(Section(parse_text(json_text, "model description"), "model"), spec);
  return spec;
}

void apply_overrides(RunConfig& cfg, const Overrides& o) {
  if (o.seed) {
    cfg.train.seed = *o.seed;
    cfg.synth.seed = *o.seed;
  }
  if (o.epochs) cfg.train.epochs = *o.epochs;
  if (o.no_pool) cfg.model.context.junction.pool_enabled = false;
  if (o.junction_order) cfg.model.context.junction.order = *o.junction_order;
  if (o.model) cfg.model.kind = *o.model;
  if (const char* env = std::getenv("CTXLSTM_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
}

std::unique_ptr<SequenceClassifier> init_model(const ModelSpec& spec, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kInitStream));
  return make_model(spec, rng);
}

}  // namespace ctxlstm
