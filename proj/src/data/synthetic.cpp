// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>
#include <limits>

#include "ctxlstm/data.hpp"
#include "ctxlstm/random.hpp"

namespace ctxlstm {

namespace fs = std::filesystem;

void SyntheticTaskSpec::validate() const {
  if (num_classes < 2) throw ConfigError("synthetic task needs at least 2 classes");
  if (dim < 1 || time < 1 || samples_per_class < 1) throw ConfigError("synthetic task sizes must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synthetic noise sigma must be >= 0");
}

std::vector<Tensor> synthetic_prototypes(const SyntheticTaskSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x50524F544FULL));  // "PROTO"
  std::vector<Tensor> protos;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    Tensor p = Tensor::zeros({spec.time, spec.dim});
    for (double& v : p.mutable_values()) v = standard_normal(rng);
    protos.push_back(std::move(p));
  }
  return protos;
}

SyntheticDataset generate_synthetic(const SyntheticTaskSpec& spec, const fs::path& out_dir) {
  SyntheticDataset result;
  result.root = out_dir;
  result.prototypes = synthetic_prototypes(spec);
  for (std::size_t a = 0; a < spec.num_classes; ++a) {
    for (std::size_t b = a + 1; b < spec.num_classes; ++b) {
      auto pa = result.prototypes[a].values();
      auto pb = result.prototypes[b].values();
      if (std::equal(pa.begin(), pa.end(), pb.begin())) throw DataError("synthetic prototypes collided");
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir / "samples", ec);
  if (ec) throw IoError("cannot create '" + (out_dir / "samples").string() + "': " + ec.message());

  Rng noise(derive_seed(spec.seed, 0x4E4F495345ULL));  // "NOISE"
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    result.all.class_names.push_back("class_" + std::to_string(c));
  }
  result.all.dim = spec.dim;
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      FeatureSequence seq;
      seq.label = c;
      seq.frames = result.prototypes[c].clone();
      for (double& v : seq.frames.mutable_values()) v += spec.noise_sigma * standard_normal(noise);
      char name[64];
      std::snprintf(name, sizeof name, "c%03zu_%05zu.clsf", c, i);
      const fs::path path = out_dir / "samples" / name;
      write_feature_file(path, seq);
      result.all.entries.push_back({path, c});
    }
  }
  std::tie(result.train, result.test) = split_dataset(result.all, 3, 1, spec.seed);
  save_manifest(result.all, out_dir / "manifest.tsv");
  save_manifest(result.train, out_dir / "train.tsv");
  save_manifest(result.test, out_dir / "test.tsv");
  return result;
}

double nearest_prototype_accuracy(const std::vector<Tensor>& prototypes, const Dataset& data) {
  if (data.items.empty()) throw DataError("nearest-prototype oracle on an empty dataset");
  std::size_t correct = 0;
  for (const auto& item : data.items) {
    auto x = item.frames.values();
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < prototypes.size(); ++c) {
      auto p = prototypes[c].values();
      if (p.size() != x.size()) throw DimensionError("prototype and sequence sizes differ");
      double d = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - p[i]) * (x[i] - p[i]);
      if (d < best_dist) {
        best_dist = d;
        best = c;
      }
    }
    correct += best == item.label ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.items.size());
}

}  // namespace ctxlstm
