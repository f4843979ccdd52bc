#include "scam/model.hpp"

#include "scam/errors.hpp"

namespace scam {

EncoderConfig ModelConfig::encoder() const {
  EncoderConfig c;
  c.num_blocks = encoder_blocks;
  c.k = k;
  c.d = d;
  c.num_labels = num_labels;
  c.conv_channels = encoder_channels;
  c.conv_stride = encoder_stride;
  c.use_conv = encoder_conv;
  c.use_self_attention = encoder_self_attention;
  c.attention_dim = attention_dim;
  c.heads = heads;
  c.tau = tau;
  c.residual = residual;
  return c;
}

GeneratorConfig ModelConfig::generator() const {
  GeneratorConfig c;
  c.num_blocks = generator_blocks;
  c.image_size = image_size;
  c.channels = generator_channels;
  c.d = d;
  c.k = k;
  c.num_labels = num_labels;
  c.use_latent_sat = generator_latent_sat;
  c.noise_enabled = noise;
  c.upsample = upsample;
  c.attention_dim = attention_dim;
  c.heads = heads;
  c.tau = tau;
  c.residual = residual;
  c.spectral_norm = spectral_norm;
  return c;
}

DiscriminatorConfig ModelConfig::discriminator() const {
  DiscriminatorConfig c;
  c.num_layers = discriminator_layers;
  c.base_channels = discriminator_channels;
  c.num_labels = num_labels;
  c.use_gradnorm = gradnorm;
  c.spectral_norm = spectral_norm;
  return c;
}

void ModelConfig::validate() const {
  if (image_size < 1) throw ConfigError("image size must be positive");
  if (heads < 1 || attention_dim % heads != 0 || d % heads != 0) {
    throw ConfigError("attention_dim and d must be divisible by heads");
  }
  if (tau > -1e9) throw ConfigError("tau must be <= -1e9");
  encoder().validate();
  generator().validate();
  discriminator().validate();
  if (encoder_conv) {
    // every block but the last reduces the map; the last must still be >= stride
    int64_t side = image_size;
    for (int64_t i = 0; i < encoder_blocks; ++i) {
      if (side < encoder_stride) {
        throw ConfigError("image size " + std::to_string(image_size) + " is too small for " +
                          std::to_string(encoder_blocks) + " strided encoder blocks");
      }
      side = (side + encoder_stride - 1) / encoder_stride;
    }
  }
}

ScamModelImpl::ScamModelImpl(const ModelConfig& config) : config_(config) {
  config_.validate();
  encoder = register_module("encoder", SatEncoder(config_.encoder()));
  generator = register_module("generator", ScamGenerator(config_.generator()));
}

LatentSet ScamModelImpl::encode(const torch::Tensor& image, const SemanticMask& mask) {
  return encoder->forward(image, mask);
}

GeneratorOutput ScamModelImpl::generate(const LatentSet& latents, const SemanticMask& mask,
                                        std::optional<at::Generator> noise_source, bool capture) {
  return generator->forward(latents, mask, std::move(noise_source), capture);
}

torch::Tensor ScamModelImpl::reconstruct(const torch::Tensor& image, const SemanticMask& mask,
                                         std::optional<at::Generator> noise_source) {
  return generate(encode(image, mask), mask, std::move(noise_source)).image;
}

void ScamModelImpl::set_noise_active(bool active) {
  for (auto& m : generator->modules(/*include_self=*/false)) {
    if (auto* op = dynamic_cast<ScamOperationImpl*>(m.get())) op->set_noise_active(active);
  }
}

}  // namespace scam
