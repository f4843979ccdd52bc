#pragma once

// Dataset ingestion (image + label-mask pairs, label merging) and the
// synthetic coloured-shapes generator used for desk-scale runs.
//
// Directory layout:
//   root/{split}/images/<stem>.png   RGB image
//   root/{split}/masks/<stem>.png    single-channel label indices
//   root/{split}/index.txt           optional, "images/<stem>.png masks/<stem>.png" per line

#include <torch/torch.h>

#include <array>
#include <map>
#include <string>
#include <vector>

#include "scam/masks.hpp"

namespace scam {

struct DatasetItem {
  std::string stem;
  std::string image_path;
  std::string mask_path;
};

struct DatasetManifest {
  std::string root;
  std::string split;
  std::vector<DatasetItem> items;
  /// original label -> merged label; empty means identity.
  std::map<int64_t, int64_t> label_remap;
  int64_t num_labels = 1;
  /// Labels every mask must contain unless allow_missing_labels is set.
  std::vector<int64_t> required_labels;
  bool allow_missing_labels = true;

  /// Uses root/{split}/index.txt when present, otherwise pairs
  /// images/*.png with masks/*.png by file stem.
  static DatasetManifest open(const std::string& root, const std::string& split,
                              int64_t num_labels);

  /// Reads a two-column "original merged" remap file.
  void load_remap(const std::string& path);

  void write_index(const std::string& path) const;
  size_t size() const { return items.size(); }
};

struct LoadedItem {
  torch::Tensor image;  // float [3, H, W] in [-1, 1]
  SemanticMask mask;    // [1, H, W]
};

LoadedItem load_item(const DatasetManifest& manifest, size_t index);

struct Batch {
  torch::Tensor images;  // [B, 3, H, W]
  SemanticMask masks;
};

/// Whole split decoded into memory.
struct InMemoryDataset {
  torch::Tensor images;  // [N, 3, H, W]
  torch::Tensor labels;  // [N, H, W] int64
  int64_t num_labels = 1;
  std::vector<std::string> stems;

  int64_t size() const { return images.defined() ? images.size(0) : 0; }
  Batch batch(const torch::Tensor& indices) const;
  Batch range(int64_t begin, int64_t end) const;
};

InMemoryDataset load_dataset(const DatasetManifest& manifest);

struct SyntheticSpec {
  int64_t image_size = 32;
  int64_t num_labels = 3;  // label 0 is background, others alternate ellipse / polygon
  /// Base colour per label in [0, 1]; missing entries are drawn from the seed.
  std::vector<std::array<double, 3>> palette = {
      {0.55, 0.60, 0.70}, {0.85, 0.30, 0.25}, {0.25, 0.70, 0.35}};
  int64_t shapes_per_label = 1;
  double color_jitter = 0.25;
  double gradient_strength = 0.45;
  uint64_t seed = 0;
  int64_t train_count = 2000;
  int64_t test_count = 200;

  void validate() const;
};

struct SyntheticSample {
  torch::Tensor rgb;     // uint8 [H, W, 3]
  torch::Tensor labels;  // int64 [H, W]
};

/// Draws one image; `index` selects the sample within the seeded stream.
SyntheticSample synthesize_sample(const SyntheticSpec& spec, uint64_t stream, int64_t index);

/// Writes root/train and root/test per the directory layout above.
void generate_synthetic(const SyntheticSpec& spec, const std::string& root);

}  // namespace scam
