#pragma once

// Shared data model: label maps, their duplicated binary forms, latent sets,
// and the 2D sinusoidal encodings added to pixel tokens.

#include <torch/torch.h>

#include <cstdint>

namespace scam {

/// Integer label map, int64 [B, H, W] with every value in [0, num_labels).
struct SemanticMask {
  torch::Tensor labels;
  int64_t num_labels = 1;

  /// Validates and promotes a [H, W] map to a batch of one.
  static SemanticMask from_labels(torch::Tensor labels, int64_t num_labels);

  int64_t batch() const { return labels.size(0); }
  int64_t height() const { return labels.size(1); }
  int64_t width() const { return labels.size(2); }
  int64_t pixels() const { return height() * width(); }

  /// Selects items along the batch dimension.
  SemanticMask slice(int64_t begin, int64_t end) const;

  void validate() const;
};

/// Binary [B, n, m] matrix; column j belongs to label j / k (label-major).
struct DuplicatedMask {
  torch::Tensor bits;
  int64_t k = 1;
  int64_t num_labels = 1;

  int64_t n() const { return bits.size(1); }
  int64_t m() const { return bits.size(2); }
};

/// Block-diagonal [m, m] matrix: latents i and j share a label.
struct LatentGroupMask {
  torch::Tensor bits;
  int64_t k = 1;

  int64_t m() const { return bits.size(0); }
};

/// m = k * num_labels style latents of dimension d, [B, m, d], grouped label-major.
struct LatentSet {
  torch::Tensor values;
  int64_t k = 1;
  int64_t num_labels = 1;

  int64_t batch() const { return values.size(0); }
  int64_t m() const { return values.size(1); }
  int64_t d() const { return values.size(2); }

  /// Row range [label * k, (label + 1) * k).
  torch::Tensor label_rows(int64_t label) const;

  void validate() const;
};

DuplicatedMask duplicate_mask(const SemanticMask& mask, int64_t k,
                              torch::Dtype dtype = torch::kFloat32);

LatentGroupMask build_latent_group_mask(int64_t num_labels, int64_t k,
                                        torch::Dtype dtype = torch::kFloat32);

/// Nearest-neighbour resampling: output (i, j) takes source (i * H / h, j * W / w).
SemanticMask downsample_mask(const SemanticMask& mask, int64_t target_h, int64_t target_w);

/// One-hot planes, [B, num_labels, H, W].
torch::Tensor one_hot(const SemanticMask& mask, torch::Dtype dtype = torch::kFloat32);

/// [channels, h, w] encoding. The first half of the channels encodes the row
/// index and the second half the column index, each as interleaved
/// (sin, cos) pairs at geometrically spaced frequencies.
torch::Tensor positional_encoding_2d(int64_t h, int64_t w, int64_t channels,
                                     torch::Dtype dtype = torch::kFloat32);

/// [B, C, H, W] -> [B, H*W, C], row-major over pixels.
torch::Tensor flatten_pixels(const torch::Tensor& features);

/// [B, H*W, C] -> [B, C, H, W].
torch::Tensor unflatten_pixels(const torch::Tensor& tokens, int64_t h, int64_t w);

}  // namespace scam
