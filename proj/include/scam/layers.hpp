#pragma once

#include <torch/torch.h>

namespace scam {

struct ConvSpec {
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t kernel = 3;
  int64_t stride = 1;
  int64_t padding = 1;
  bool spectral_norm = false;
};

/// 2D convolution with optional spectral normalisation of its weight
/// (one power iteration per training-mode forward, persistent `u` buffer).
class ConvLayerImpl : public torch::nn::Module {
 public:
  explicit ConvLayerImpl(const ConvSpec& spec);

  torch::Tensor forward(const torch::Tensor& x);

  /// Weight actually applied, after spectral normalisation when enabled.
  torch::Tensor effective_weight();

  const ConvSpec& spec() const { return spec_; }

  torch::nn::Conv2d conv{nullptr};

 private:
  ConvSpec spec_;
  torch::Tensor u_;
};
TORCH_MODULE(ConvLayer);

/// Non-affine instance normalisation over the spatial dims of [B, C, H, W].
torch::Tensor instance_norm(const torch::Tensor& x, double eps = 1e-5);

/// Total element count of all parameters requiring gradients.
int64_t count_parameters(const torch::nn::Module& module);

}  // namespace scam
