// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <iterator>

#include "ctxlstm/binary_io.hpp"
#include "ctxlstm/data.hpp"

namespace ctxlstm {
namespace {

constexpr unsigned char kMagic[4] = {'C', 'L', 'S', 'F'};
constexpr std::size_t kHeaderBytes = 20;
constexpr std::size_t kChecksumBytes = 8;

using Reason = FeatureFileError::Reason;

}  // namespace

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error while writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' into place at '" + path.string() + "'");
  }
}

std::vector<unsigned char> encode_feature_file(const FeatureSequence& seq) {
  if (!seq.frames.defined() || seq.frames.rank() != 2) {
    throw FeatureFileError(Reason::inconsistent, "feature sequence must be a [time, dim] tensor");
  }
  const std::size_t time = seq.frames.dim(0), dim = seq.frames.dim(1);
  if (time > UINT32_MAX || dim > UINT32_MAX || seq.label > UINT32_MAX) {
    throw FeatureFileError(Reason::inconsistent, "feature sequence dimensions exceed the u32 format");
  }
  ByteWriter w;
  w.raw(kMagic);
  w.u32(kFeatureFileVersion);
  w.u32(static_cast<std::uint32_t>(time));
  w.u32(static_cast<std::uint32_t>(dim));
  w.u32(static_cast<std::uint32_t>(seq.label));
  for (double v : seq.frames.values()) w.f32(static_cast<float>(v));
  const std::uint64_t sum = fnv1a64(w.bytes());
  w.u64(sum);
  return w.take();
}

FeatureSequence decode_feature_file(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4) throw FeatureFileError(Reason::truncated, "feature file truncated before magic");
  if (!std::equal(bytes.begin(), bytes.begin() + 4, kMagic)) {
    throw FeatureFileError(Reason::bad_magic, "not a feature file (bad magic)");
  }
  if (bytes.size() < kHeaderBytes) throw FeatureFileError(Reason::truncated, "feature file header truncated");
  ByteReader r(bytes.subspan(4));
  std::uint32_t version = 0, time = 0, dim = 0, label = 0;
  r.u32(version);
  r.u32(time);
  r.u32(dim);
  r.u32(label);
  if (version != kFeatureFileVersion) {
    throw FeatureFileError(Reason::unsupported_version,
                           "feature file version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(kFeatureFileVersion) + ")");
  }
  if (time == 0 || dim == 0) {
    throw FeatureFileError(Reason::inconsistent, "feature file declares time " + std::to_string(time) +
                                                     " and dim " + std::to_string(dim));
  }
  const std::uint64_t payload = 4ULL * time * dim;
  const std::uint64_t expected = kHeaderBytes + payload + kChecksumBytes;
  if (bytes.size() < expected) {
    throw FeatureFileError(Reason::truncated, "feature file truncated: " + std::to_string(bytes.size()) +
                                                  " bytes, header implies " + std::to_string(expected));
  }
  if (bytes.size() > expected) {
    throw FeatureFileError(Reason::trailing_bytes, "feature file has " + std::to_string(bytes.size() - expected) +
                                                       " unexpected trailing bytes");
  }
  const std::size_t body = static_cast<std::size_t>(kHeaderBytes + payload);
  ByteReader tail(bytes.subspan(body));
  std::uint64_t stored = 0;
  tail.u64(stored);
  if (stored != fnv1a64(bytes.first(body))) {
    throw FeatureFileError(Reason::checksum, "feature file checksum mismatch");
  }

  FeatureSequence seq;
  seq.label = label;
  seq.frames = Tensor::zeros({time, dim});
  auto vals = seq.frames.mutable_values();
  ByteReader frames(bytes.subspan(kHeaderBytes, static_cast<std::size_t>(payload)));
  for (double& v : vals) {
    float f = 0.0f;
    frames.f32(f);
    v = f;
  }
  return seq;
}

void write_feature_file(const std::filesystem::path& path, const FeatureSequence& seq) {
  write_file_bytes(path, encode_feature_file(seq));
}

FeatureSequence read_feature_file(const std::filesystem::path& path) {
  std::vector<unsigned char> bytes;
  try {
    bytes = read_file_bytes(path);
  } catch (const IoError& e) {
    throw FeatureFileError(Reason::io, e.what());
  }
  try {
    FeatureSequence seq = decode_feature_file(bytes);
    seq.id = path.stem().string();
    return seq;
  } catch (const FeatureFileError& e) {
    throw FeatureFileError(e.reason(), path.string() + ": " + e.what());
  }
}

}  // namespace ctxlstm
