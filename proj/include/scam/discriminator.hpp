#pragma once

#include <torch/torch.h>

#include "scam/layers.hpp"
#include "scam/masks.hpp"

namespace scam {

struct DiscriminatorConfig {
  int64_t num_layers = 4;
  int64_t base_channels = 64;
  int64_t num_labels = 3;
  bool use_gradnorm = true;
  bool spectral_norm = false;

  void validate() const;
};

/// PatchGAN over [image, one-hot mask]: `num_layers` stride-2 4x4 convolutions
/// with LeakyReLU, then a 3x3 convolution to one score channel. Scores are raw
/// (no sigmoid); a 64px input with 4 layers yields a 4x4 grid.
class PatchDiscriminatorImpl : public torch::nn::Module {
 public:
  explicit PatchDiscriminatorImpl(const DiscriminatorConfig& config);

  /// Raw patch scores, [B, 1, h', w'].
  torch::Tensor forward(const torch::Tensor& image, const SemanticMask& mask);

  /// Scores used by the losses: raw scores, or gradient-normalised scores
  /// when use_gradnorm is set. `create_graph` keeps the input-gradient graph
  /// so the result can itself be differentiated (needed for training).
  torch::Tensor score(const torch::Tensor& image, const SemanticMask& mask,
                      bool create_graph = true);

  const DiscriminatorConfig& config() const { return config_; }

  torch::nn::ModuleList layers{nullptr};

 private:
  DiscriminatorConfig config_;
};
TORCH_MODULE(PatchDiscriminator);

/// scores / (grad_norm + |scores| + eps), grad_norm broadcast per batch item.
/// |result| < 1 always.
torch::Tensor gradnorm_scale(const torch::Tensor& scores, const torch::Tensor& grad_norm,
                             double eps = 1e-8);

/// Per-item L2 norm of d(mean patch score)/d(input), [B].
torch::Tensor input_gradient_norm(const torch::Tensor& scores, const torch::Tensor& input,
                                  bool create_graph);

}  // namespace scam
