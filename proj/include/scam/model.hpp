#pragma once

#include <torch/torch.h>

#include <optional>
#include <vector>

#include "scam/discriminator.hpp"
#include "scam/encoder.hpp"
#include "scam/generator.hpp"

namespace scam {

/// Every architecture hyperparameter, flat, from which the per-network
/// configurations are derived. Defaults are the full-scale settings.
struct ModelConfig {
  int64_t image_size = 256;
  int64_t num_labels = 3;
  int64_t k = 8;
  int64_t d = 256;
  int64_t attention_dim = 256;
  int64_t heads = 4;
  double tau = -1e9;
  ResidualMode residual = ResidualMode::block_input;
  bool spectral_norm = false;

  int64_t encoder_blocks = 6;
  std::vector<int64_t> encoder_channels;
  int64_t encoder_stride = 2;
  bool encoder_conv = true;
  bool encoder_self_attention = true;

  int64_t generator_blocks = 7;
  std::vector<int64_t> generator_channels;
  bool generator_latent_sat = true;
  bool noise = true;
  UpsampleMode upsample = UpsampleMode::nearest;

  int64_t discriminator_layers = 4;
  int64_t discriminator_channels = 64;
  bool gradnorm = true;

  EncoderConfig encoder() const;
  GeneratorConfig generator() const;
  DiscriminatorConfig discriminator() const;
  void validate() const;
};

/// Encoder and generator trained jointly on reconstruction.
class ScamModelImpl : public torch::nn::Module {
 public:
  explicit ScamModelImpl(const ModelConfig& config);

  LatentSet encode(const torch::Tensor& image, const SemanticMask& mask);

  GeneratorOutput generate(const LatentSet& latents, const SemanticMask& mask,
                           std::optional<at::Generator> noise_source = std::nullopt,
                           bool capture = false);

  /// generate(encode(image, mask), mask).image
  torch::Tensor reconstruct(const torch::Tensor& image, const SemanticMask& mask,
                            std::optional<at::Generator> noise_source = std::nullopt);

  /// Turns the generator's noise draws on or off (parameters are kept).
  void set_noise_active(bool active);

  const ModelConfig& config() const { return config_; }

  SatEncoder encoder{nullptr};
  ScamGenerator generator{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(ScamModel);

}  // namespace scam
