#pragma once

// Semantic attention transformer encoder: learned latent queries harvest
// image information across a strided-convolution feature pyramid.

#include <torch/torch.h>

#include <utility>
#include <vector>

#include "scam/layers.hpp"
#include "scam/masks.hpp"
#include "scam/sat.hpp"

namespace scam {

struct EncoderConfig {
  int64_t num_blocks = 6;
  int64_t k = 8;
  int64_t d = 256;
  int64_t num_labels = 3;
  /// Feature channels entering each block; empty selects default_channels().
  std::vector<int64_t> conv_channels;
  int64_t conv_stride = 2;
  bool use_conv = true;
  bool use_self_attention = true;
  int64_t attention_dim = 256;
  int64_t heads = 4;
  double tau = -1e9;
  ResidualMode residual = ResidualMode::block_input;

  /// 64 doubling per level, capped at 512.
  static std::vector<int64_t> default_channels(int64_t num_blocks);

  std::vector<int64_t> channels() const;
  int64_t latent_count() const { return k * num_labels; }
  void validate() const;
};

/// One pyramid level: latents attend the (positionally encoded) features of
/// their label, optionally refine among their label group, then the features
/// are reduced by a strided convolution for the next level.
class SatBlockImpl : public torch::nn::Module {
 public:
  SatBlockImpl(const EncoderConfig& config, int64_t level);

  std::pair<torch::Tensor, LatentSet> forward(const torch::Tensor& features,
                                              const LatentSet& latents,
                                              const SemanticMask& mask);

  int64_t level() const { return level_; }
  int64_t in_channels() const { return in_channels_; }

  SatOperation cross{nullptr};
  SatOperation self_attention{nullptr};
  ConvLayer conv{nullptr};

 private:
  EncoderConfig config_;
  int64_t level_;
  int64_t in_channels_;
};
TORCH_MODULE(SatBlock);

class SatEncoderImpl : public torch::nn::Module {
 public:
  explicit SatEncoderImpl(const EncoderConfig& config);

  /// image: [B, 3, H, W] in [-1, 1]; mask of the same spatial size.
  LatentSet forward(const torch::Tensor& image, const SemanticMask& mask);

  /// Level-0 features fed to the first block.
  torch::Tensor stem(const torch::Tensor& image);

  const EncoderConfig& config() const { return config_; }

  ConvLayer input_proj{nullptr};
  torch::Tensor queries;  // [m, d]
  torch::nn::ModuleList blocks{nullptr};

 private:
  EncoderConfig config_;
};
TORCH_MODULE(SatEncoder);

}  // namespace scam
