#include "scam/encoder.hpp"

#include <algorithm>

#include "scam/errors.hpp"

namespace scam {

std::vector<int64_t> EncoderConfig::default_channels(int64_t num_blocks) {
  std::vector<int64_t> out;
  int64_t c = 64;
  for (int64_t i = 0; i < num_blocks; ++i) {
    out.push_back(c);
    c = std::min<int64_t>(c * 2, 512);
  }
  return out;
}

std::vector<int64_t> EncoderConfig::channels() const {
  return conv_channels.empty() ? default_channels(num_blocks) : conv_channels;
}

void EncoderConfig::validate() const {
  if (num_blocks < 1) throw ConfigError("encoder needs at least one block");
  if (k < 1 || d < 1 || num_labels < 1) throw ConfigError("encoder k, d and s must be positive");
  const auto ch = channels();
  if (static_cast<int64_t>(ch.size()) != num_blocks) {
    throw ConfigError("encoder channel schedule must have one entry per block");
  }
  for (auto c : ch) {
    if (c <= 0 || c % 4 != 0) {
      throw ConfigError("encoder channels must be positive multiples of 4");
    }
  }
  if (conv_stride < 1) throw ConfigError("encoder stride must be positive");
}

SatBlockImpl::SatBlockImpl(const EncoderConfig& config, int64_t level)
    : config_(config), level_(level) {
  const auto ch = config.channels();
  in_channels_ = config.use_conv ? ch.at(level) : ch.at(0);

  SatOptions opts;
  opts.primary_dim = config.d;
  opts.context_dim = in_channels_;
  opts.attention_dim = config.attention_dim;
  opts.heads = config.heads;
  opts.tau = config.tau;
  opts.residual = config.residual;
  cross = register_module("cross", SatOperation(opts));

  if (config.use_self_attention) {
    opts.context_dim = config.d;
    self_attention = register_module("self_attention", SatOperation(opts));
  }
  if (config.use_conv) {
    const auto next = ch.at(std::min<int64_t>(level + 1, config.num_blocks - 1));
    conv = register_module("conv", ConvLayer(ConvSpec{in_channels_, next, 3, config.conv_stride,
                                                       1, false}));
  }
}

std::pair<torch::Tensor, LatentSet> SatBlockImpl::forward(const torch::Tensor& features,
                                                          const LatentSet& latents,
                                                          const SemanticMask& mask) {
  if (features.dim() != 4 || features.size(1) != in_channels_) {
    throw ShapeError("block " + std::to_string(level_) + " expects " +
                     std::to_string(in_channels_) + " feature channels");
  }
  const auto h = features.size(2), w = features.size(3);
  if (config_.use_conv && (h < config_.conv_stride || w < config_.conv_stride)) {
    throw ShapeError("feature map " + std::to_string(h) + "x" + std::to_string(w) +
                     " is smaller than the convolution stride");
  }
  const auto dtype = features.scalar_type();
  auto dup = duplicate_mask(downsample_mask(mask, h, w), config_.k, dtype);
  auto tokens = flatten_pixels(features + positional_encoding_2d(h, w, in_channels_, dtype));

  auto z = cross->forward(latents.values, tokens, dup.bits.transpose(1, 2));
  if (config_.use_self_attention) {
    auto group = build_latent_group_mask(config_.num_labels, config_.k, dtype);
    z = self_attention->forward(z, z, group.bits);
  }
  auto next = features;
  if (config_.use_conv) next = torch::leaky_relu(conv->forward(features), 0.2);
  return {next, LatentSet{z, latents.k, latents.num_labels}};
}

SatEncoderImpl::SatEncoderImpl(const EncoderConfig& config) : config_(config) {
  config_.validate();
  const auto ch = config_.channels();
  input_proj = register_module("input_proj", ConvLayer(ConvSpec{3, ch.at(0), 1, 1, 0, false}));
  queries = register_parameter("queries", torch::randn({config_.latent_count(), config_.d}));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int64_t i = 0; i < config_.num_blocks; ++i) blocks->push_back(SatBlock(config_, i));
}

torch::Tensor SatEncoderImpl::stem(const torch::Tensor& image) {
  return input_proj->forward(image);
}

LatentSet SatEncoderImpl::forward(const torch::Tensor& image, const SemanticMask& mask) {
  if (image.dim() != 4 || image.size(1) != 3) throw ShapeError("encoder expects [B, 3, H, W]");
  if (image.size(0) != mask.batch() || image.size(2) != mask.height() ||
      image.size(3) != mask.width()) {
    throw ShapeError("image and mask dimensions differ");
  }
  if (mask.num_labels != config_.num_labels) throw ShapeError("mask label count != encoder s");
  LatentSet z{queries.unsqueeze(0).expand({image.size(0), -1, -1}), config_.k,
              config_.num_labels};
  auto x = stem(image);
  for (const auto& module : *blocks) {
    auto out = module->as<SatBlockImpl>()->forward(x, z, mask);
    x = std::move(out.first);
    z = std::move(out.second);
  }
  return z;
}

}  // namespace scam
