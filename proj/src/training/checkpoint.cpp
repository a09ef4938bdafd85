// SPDX-License-Identifier: Apache-2.0
//
// Layout (little-endian): "CLCK" | u32 version | body | u64 FNV-1a of all
// preceding bytes. The body holds the model config string, the training
// config, progress counters, the RNG state, named parameter and buffer
// blobs (f64) and the Adam moments.
#include <algorithm>

#include "ctxlstm/binary_io.hpp"
#include "ctxlstm/errors.hpp"
#include "ctxlstm/training.hpp"

namespace ctxlstm {
namespace {

constexpr unsigned char kMagic[4] = {'C', 'L', 'C', 'K'};

void write_named(ByteWriter& w, const std::vector<NamedTensor>& items) {
  w.u32(static_cast<std::uint32_t>(items.size()));
  for (const auto& item : items) {
    w.str(item.name);
    const Shape& shape = item.tensor.shape();
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) w.u64(d);
    for (double v : item.tensor.values()) w.f64(v);
  }
}

[[noreturn]] void malformed(const std::string& what) { throw DataError("checkpoint is corrupted: " + what); }

std::vector<NamedTensor> read_named(ByteReader& r) {
  std::uint32_t count = 0;
  if (!r.u32(count)) malformed("truncated tensor table");
  std::vector<NamedTensor> items;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor item;
    std::uint32_t rank = 0;
    if (!r.str(item.name) || !r.u32(rank) || rank == 0 || rank > 8) malformed("bad tensor header");
    Shape shape(rank);
    std::uint64_t numel = 1;
    for (auto& d : shape) {
      std::uint64_t v = 0;
      if (!r.u64(v) || v == 0) malformed("bad tensor shape for '" + item.name + "'");
      d = static_cast<std::size_t>(v);
      numel *= v;
    }
    if (numel * 8 > r.remaining()) malformed("tensor '" + item.name + "' runs past the end of the file");
    std::vector<double> values(static_cast<std::size_t>(numel));
    for (double& v : values) r.f64(v);
    item.tensor = Tensor::from(std::move(shape), std::move(values));
    items.push_back(std::move(item));
  }
  return items;
}

void write_moments(ByteWriter& w, const std::vector<std::vector<double>>& moments) {
  w.u32(static_cast<std::uint32_t>(moments.size()));
  for (const auto& m : moments) {
    w.u64(m.size());
    for (double v : m) w.f64(v);
  }
}

std::vector<std::vector<double>> read_moments(ByteReader& r) {
  std::uint32_t count = 0;
  if (!r.u32(count)) malformed("truncated optimizer state");
  std::vector<std::vector<double>> moments;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint64_t n = 0;
    if (!r.u64(n) || n * 8 > r.remaining()) malformed("bad optimizer moment length");
    std::vector<double> m(static_cast<std::size_t>(n));
    for (double& v : m) r.f64(v);
    moments.push_back(std::move(m));
  }
  return moments;
}

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.str(c.model_config);
  w.f64(c.train.learning_rate);
  w.u64(c.train.batch_size);
  w.u64(c.train.epochs);
  w.f64(c.train.adam_beta1);
  w.f64(c.train.adam_beta2);
  w.f64(c.train.adam_eps);
  w.u64(c.train.seed);
  w.u64(c.train.eval_every);
  w.u64(c.train.time_window);
  w.u8(c.train.record_wall_time ? 1 : 0);
  w.u64(c.epoch);
  w.f64(c.best_test_acc);
  w.f64(c.last_test_acc);
  w.str(c.rng);
  write_named(w, c.parameters);
  write_named(w, c.buffers);
  w.u64(c.adam.step);
  write_moments(w, c.adam.m);
  write_moments(w, c.adam.v);
  w.u64(fnv1a64(w.bytes()));
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  if (bytes.size() < 16) malformed("file too short");
  if (!std::equal(bytes.begin(), bytes.begin() + 4, kMagic)) throw DataError("not a checkpoint file (bad magic)");
  const std::size_t body = bytes.size() - 8;
  ByteReader tail(bytes.subspan(body));
  std::uint64_t stored = 0;
  tail.u64(stored);
  ByteReader r(bytes.subspan(4, body - 4));
  std::uint32_t version = 0;
  r.u32(version);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  if (stored != fnv1a64(bytes.first(body))) malformed("checksum mismatch");

  Checkpoint c;
  std::uint64_t batch = 0, epochs = 0, eval_every = 0, window = 0;
  std::uint8_t wall = 0;
  const bool header_ok = r.str(c.model_config) && r.f64(c.train.learning_rate) && r.u64(batch) && r.u64(epochs) &&
                         r.f64(c.train.adam_beta1) && r.f64(c.train.adam_beta2) && r.f64(c.train.adam_eps) &&
                         r.u64(c.train.seed) && r.u64(eval_every) && r.u64(window) && r.u8(wall) &&
                         r.u64(c.epoch) && r.f64(c.best_test_acc) && r.f64(c.last_test_acc) && r.str(c.rng);
  if (!header_ok) malformed("truncated header");
  c.train.batch_size = batch;
  c.train.epochs = epochs;
  c.train.eval_every = eval_every;
  c.train.time_window = window;
  c.train.record_wall_time = wall != 0;
  c.parameters = read_named(r);
  c.buffers = read_named(r);
  if (!r.u64(c.adam.step)) malformed("truncated optimizer state");
  c.adam.m = read_moments(r);
  c.adam.v = read_moments(r);
  if (r.remaining() != 0) malformed("unexpected trailing bytes");
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file_bytes(path)); }

void apply_checkpoint_weights(const Checkpoint& ckpt, SequenceClassifier& model) {
  auto check = [](const std::vector<NamedTensor>& stored, const std::vector<NamedTensor>& live, const char* what) {
    if (stored.size() != live.size()) {
      throw DataError(std::string("checkpoint holds ") + std::to_string(stored.size()) + " " + what + ", model has " +
                      std::to_string(live.size()));
    }
    for (std::size_t i = 0; i < live.size(); ++i) {
      if (stored[i].name != live[i].name || stored[i].tensor.shape() != live[i].tensor.shape()) {
        throw DataError("checkpoint entry '" + stored[i].name + "' " + shape_str(stored[i].tensor.shape()) +
                        " does not match model entry '" + live[i].name + "' " + shape_str(live[i].tensor.shape()));
      }
    }
  };
  auto params = model.parameters();
  auto buffers = model.buffers();
  check(ckpt.parameters, params, "parameters");
  check(ckpt.buffers, buffers, "buffers");
  auto copy = [](const std::vector<NamedTensor>& from, std::vector<NamedTensor>& to) {
    for (std::size_t i = 0; i < to.size(); ++i) {
      auto src = from[i].tensor.values();
      std::copy(src.begin(), src.end(), to[i].tensor.mutable_values().begin());
    }
  };
  copy(ckpt.parameters, params);
  copy(ckpt.buffers, buffers);
}

}  // namespace ctxlstm
