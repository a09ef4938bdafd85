// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ctxlstm/binary_io.hpp"
#include "ctxlstm/data.hpp"
#include "ctxlstm/random.hpp"

namespace ctxlstm {

namespace fs = std::filesystem;

void DatasetManifest::validate() const {
  std::set<fs::path> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].label >= num_classes()) {
      throw DataError("manifest entry " + std::to_string(i) + " (" + entries[i].path.string() + ") has label " +
                      std::to_string(entries[i].label) + " but only " + std::to_string(num_classes()) +
                      " classes are defined");
    }
    if (!seen.insert(entries[i].path.lexically_normal()).second) {
      throw DataError("manifest lists '" + entries[i].path.string() + "' more than once");
    }
  }
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  const fs::path base = path.parent_path();
  DatasetManifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 'path<TAB>label'");
    }
    std::size_t label = 0;
    std::istringstream ls(line.substr(tab + 1));
    if (!(ls >> label) || !ls.eof()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad label '" + line.substr(tab + 1) + "'");
    }
    fs::path entry = line.substr(0, tab);
    if (entry.is_relative()) entry = base / entry;
    m.entries.push_back({entry, label});
  }

  const fs::path classes = base / "classes.txt";
  std::ifstream cin(classes);
  if (!cin) throw IoError("cannot open class list '" + classes.string() + "'");
  while (std::getline(cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    m.class_names.push_back(line);
  }
  while (!m.class_names.empty() && m.class_names.back().empty()) m.class_names.pop_back();
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  manifest.validate();
  const fs::path base = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  std::ostringstream os;
  for (const auto& e : manifest.entries) {
    fs::path stored = e.path;
    const fs::path rel = e.path.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") stored = rel;
    os << stored.generic_string() << '\t' << e.label << '\n';
  }
  const std::string text = os.str();
  write_file_bytes(path, {reinterpret_cast<const unsigned char*>(text.data()), text.size()});

  std::ostringstream cs;
  for (const auto& name : manifest.class_names) cs << name << '\n';
  const std::string classes = cs.str();
  write_file_bytes(base / "classes.txt", {reinterpret_cast<const unsigned char*>(classes.data()), classes.size()});
}

std::pair<DatasetManifest, DatasetManifest> split_dataset(const DatasetManifest& manifest, std::size_t ratio_train,
                                                          std::size_t ratio_test, std::uint64_t seed) {
  const std::size_t n = manifest.entries.size();
  if (n < 4) throw DataError("split needs at least 4 entries, got " + std::to_string(n));
  if (ratio_train == 0 || ratio_test == 0) throw ConfigError("split ratios must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x53504C4954ULL));  // "SPLIT"
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * static_cast<double>(ratio_train) /
                   static_cast<double>(ratio_train + ratio_test)));

  DatasetManifest train, test;
  train.class_names = test.class_names = manifest.class_names;
  train.dim = test.dim = manifest.dim;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? train : test).entries.push_back(manifest.entries[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

Dataset load_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  if (manifest.entries.empty()) throw DataError("dataset manifest is empty");
  Dataset data;
  data.class_names = manifest.class_names;
  for (const auto& e : manifest.entries) {
    FeatureSequence seq = read_feature_file(e.path);
    if (seq.label != e.label) {
      throw DataError(e.path.string() + ": file label " + std::to_string(seq.label) +
                      " disagrees with manifest label " + std::to_string(e.label));
    }
    const std::size_t dim = seq.frames.dim(1);
    if (data.dim == 0) {
      data.dim = dim;
    } else if (dim != data.dim) {
      throw DataError(e.path.string() + ": feature dim " + std::to_string(dim) + " differs from dataset dim " +
                      std::to_string(data.dim));
    }
    data.items.push_back(std::move(seq));
  }
  return data;
}

}  // namespace ctxlstm
