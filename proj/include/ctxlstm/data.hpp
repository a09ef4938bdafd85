// SPDX-License-Identifier: Apache-2.0
//
// Feature-sequence files, dataset manifests, the train/test split, window
// batching and the synthetic temporal-prototype task.
//
// Feature file layout (little-endian):
//   "CLSF" | u32 version (=1) | u32 time | u32 dim | u32 label
//   | time*dim f32 frames, row-major | u64 FNV-1a of every preceding byte
//
// Manifest: UTF-8 text, one "path<TAB>label" per line. Relative paths are
// resolved against the manifest's directory. A companion classes.txt in the
// same directory lists one class name per line; line number = label.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ctxlstm/errors.hpp"
#include "ctxlstm/tensor.hpp"

namespace ctxlstm {

inline constexpr std::uint32_t kFeatureFileVersion = 1;

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

struct FeatureSequence {
  Tensor frames;  // [time, dim]
  std::size_t label = 0;
  std::string id;
};

class FeatureFileError : public DataError {
 public:
  enum class Reason { io, bad_magic, unsupported_version, truncated, trailing_bytes, inconsistent, checksum };

  FeatureFileError(Reason reason, const std::string& what) : DataError(what), reason_(reason) {}
  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

std::vector<unsigned char> encode_feature_file(const FeatureSequence& seq);
// id is left empty; read_feature_file fills it from the file stem.
FeatureSequence decode_feature_file(std::span<const unsigned char> bytes);

void write_feature_file(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence read_feature_file(const std::filesystem::path& path);

struct ManifestEntry {
  std::filesystem::path path;
  std::size_t label = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;
  std::size_t dim = 0;  // 0 until sequences are read

  std::size_t num_classes() const { return class_names.size(); }
  // Labels in range and unique paths; throws DataError.
  void validate() const;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
// Writes the manifest and classes.txt next to it. Entries under the
// manifest directory are stored relative to it.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Seeded shuffle, then the first round(N * train/(train+test)) entries train.
std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest,
                                                          std::size_t ratio_train, std::size_t ratio_test,
                                                          std::uint64_t seed);

// Sequences resident in memory.
struct Dataset {
  std::vector<FeatureSequence> items;
  std::vector<std::string> class_names;
  std::size_t dim = 0;

  std::size_t size() const { return items.size(); }
  std::size_t num_classes() const { return class_names.size(); }
};

Dataset load_dataset(const DatasetManifest& manifest);

struct SequenceBatch {
  Tensor features;                  // [batch, window, dim]
  std::vector<std::size_t> labels;
  std::vector<std::size_t> indices;  // positions in the dataset
};

enum class Sampling { training, evaluation };

// Training: order shuffled by (seed, epoch), uniform random window starts.
// Evaluation: dataset order, centered windows. The final batch may be short.
std::vector<SequenceBatch> make_batches(const Dataset& data, std::size_t batch_size, std::size_t window,
                                        std::uint64_t seed, std::uint64_t epoch, Sampling sampling);

struct SyntheticTaskSpec {
  std::size_t num_classes = 8;
  std::size_t dim = 16;
  std::size_t time = 32;
  std::size_t samples_per_class = 100;
  double noise_sigma = 0.5;
  std::uint64_t seed = 42;

  void validate() const;
};

// Class prototypes P_c[time, dim] with N(0, 1) entries.
std::vector<Tensor> synthetic_prototypes(const SyntheticTaskSpec& spec);

struct SyntheticDataset {
  std::filesystem::path root;
  DatasetManifest all;
  DatasetManifest train;
  DatasetManifest test;
  std::vector<Tensor> prototypes;
};

// Writes samples/, manifest.tsv, train.tsv, test.tsv (3:1 split keyed by
// the task seed) and classes.txt under out_dir.
SyntheticDataset generate_synthetic(const SyntheticTaskSpec& spec, const std::filesystem::path& out_dir);

// Accuracy of assigning each sequence to the prototype with least squared
// distance.
double nearest_prototype_accuracy(const std::vector<Tensor>& prototypes, const Dataset& data);

}  // namespace ctxlstm
