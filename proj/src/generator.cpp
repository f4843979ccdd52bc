#include "scam/generator.hpp"

#include <algorithm>

#include "scam/errors.hpp"

namespace scam {

namespace F = torch::nn::functional;

std::vector<int64_t> GeneratorConfig::default_channels(int64_t num_blocks) {
  std::vector<int64_t> out;
  for (int64_t j = 0; j < num_blocks; ++j) {
    out.push_back(std::min<int64_t>(int64_t{64} << std::min<int64_t>(num_blocks - 1 - j, 4), 512));
  }
  return out;
}

std::vector<int64_t> GeneratorConfig::block_channels() const {
  return channels.empty() ? default_channels(num_blocks) : channels;
}

void GeneratorConfig::validate() const {
  if (num_blocks < 1) throw ConfigError("generator needs at least one block");
  if (k < 1 || d < 1 || num_labels < 1) throw ConfigError("generator k, d and s must be positive");
  const auto ch = block_channels();
  if (static_cast<int64_t>(ch.size()) != num_blocks) {
    throw ConfigError("generator channel schedule must have one entry per block");
  }
  for (auto c : ch) {
    if (c <= 0 || c % 4 != 0) throw ConfigError("generator channels must be positive multiples of 4");
  }
  if (base_resolution() < 1 || (base_resolution() << num_blocks) != image_size) {
    throw ConfigError("image size " + std::to_string(image_size) + " is not base * 2^" +
                      std::to_string(num_blocks));
  }
}

ScamOperationImpl::ScamOperationImpl(const ScamOperationOptions& options) : options_(options) {
  if (options.use_latent_sat) {
    SatOptions sat;
    sat.primary_dim = options.d;
    sat.context_dim = options.in_channels;
    sat.attention_dim = options.attention_dim;
    sat.heads = options.heads;
    sat.tau = options.tau;
    sat.residual = options.residual;
    latent_sat = register_module("latent_sat", SatOperation(sat));
  }
  ScaOptions sca;
  sca.query_dim = options.in_channels;
  sca.key_dim = options.d;
  sca.attention_dim = options.attention_dim;
  sca.value_dim = options.d;
  sca.heads = options.heads;
  sca.tau = options.tau;
  feature_sca = register_module("feature_sca", SemanticCrossAttention(sca));

  gamma = register_module(
      "gamma", ConvLayer(ConvSpec{options.d, options.in_channels, 1, 1, 0, options.spectral_norm}));
  mu = register_module(
      "mu", ConvLayer(ConvSpec{options.d, options.in_channels, 1, 1, 0, options.spectral_norm}));
  g = register_module("g", ConvLayer(ConvSpec{options.in_channels, options.out_channels, 3, 1, 1,
                                              options.spectral_norm}));
  {
    torch::NoGradGuard no_grad;
    gamma->conv->bias.fill_(1.0);
  }
  if (options.noise_enabled) {
    noise_weight = register_parameter("noise_weight", torch::full({}, 0.05));
  }
}

torch::Tensor ScamOperationImpl::noise_sigma() const {
  if (!options_.noise_enabled) return torch::zeros({});
  return noise_weight.abs();
}

ScamOperationOutput ScamOperationImpl::forward(const torch::Tensor& features,
                                               const torch::Tensor& latents,
                                               const DuplicatedMask& dup,
                                               std::optional<at::Generator> noise_source,
                                               bool capture) {
  if (features.dim() != 4 || features.size(1) != options_.in_channels) {
    throw ShapeError("SCAM operation expects " + std::to_string(options_.in_channels) +
                     " input channels");
  }
  const auto h = features.size(2), w = features.size(3);
  if (dup.n() != h * w || dup.m() != latents.size(1)) {
    throw ShapeError("duplicated mask does not match the feature resolution or latent count");
  }
  const auto dtype = features.scalar_type();
  auto tokens =
      flatten_pixels(features + positional_encoding_2d(h, w, options_.in_channels, dtype));

  ScamOperationOutput out;
  out.latents = options_.use_latent_sat
                    ? latent_sat->forward(latents, tokens, dup.bits.transpose(1, 2))
                    : latents;

  auto attended = feature_sca->forward(tokens, out.latents, dup.bits, capture);
  if (capture) out.feature_attention = attended.record;
  auto x_sca = unflatten_pixels(attended.tokens, h, w);

  auto modulated = gamma->forward(x_sca) * instance_norm(features) + mu->forward(x_sca);
  if (noise_active()) {
    auto noise = torch::randn(modulated.sizes(), noise_source, modulated.options());
    modulated = modulated + noise_weight.abs() * noise;
  }
  out.features = g->forward(modulated);
  return out;
}

ScamBlockImpl::ScamBlockImpl(const GeneratorConfig& config, int64_t in_channels,
                             int64_t out_channels)
    : config_(config) {
  ScamOperationOptions opts;
  opts.d = config.d;
  opts.attention_dim = config.attention_dim;
  opts.heads = config.heads;
  opts.tau = config.tau;
  opts.residual = config.residual;
  opts.use_latent_sat = config.use_latent_sat;
  opts.noise_enabled = config.noise_enabled;
  opts.spectral_norm = config.spectral_norm;

  opts.in_channels = in_channels;
  opts.out_channels = in_channels;
  first = register_module("first", ScamOperation(opts));
  opts.out_channels = out_channels;
  second = register_module("second", ScamOperation(opts));
  opts.in_channels = out_channels;
  opts.out_channels = 3;
  to_rgb = register_module("to_rgb", ScamOperation(opts));
}

torch::Tensor ScamBlockImpl::upsample(const torch::Tensor& x) const {
  auto opts = F::InterpolateFuncOptions().scale_factor(std::vector<double>{2.0, 2.0});
  if (config_.upsample == UpsampleMode::bilinear) {
    opts.mode(torch::kBilinear).align_corners(false);
  } else {
    opts.mode(torch::kNearest);
  }
  return F::interpolate(x, opts);
}

ScamBlockOutput ScamBlockImpl::forward(const torch::Tensor& features,
                                       const torch::Tensor& rgb_accum,
                                       const torch::Tensor& latents, const SemanticMask& mask,
                                       std::optional<at::Generator> noise_source, bool capture) {
  const auto h = features.size(2), w = features.size(3);
  if (rgb_accum.size(2) != h || rgb_accum.size(3) != w) {
    throw ShapeError("RGB accumulator must match the block input resolution");
  }
  const auto dtype = features.scalar_type();
  auto dup_in = duplicate_mask(downsample_mask(mask, h, w), config_.k, dtype);
  auto dup_out = duplicate_mask(downsample_mask(mask, 2 * h, 2 * w), config_.k, dtype);

  ScamBlockOutput out;
  auto a = first->forward(features, latents, dup_in, noise_source, capture);
  auto x = upsample(torch::leaky_relu(a.features, 0.2));
  auto b = second->forward(x, a.latents, dup_out, noise_source, capture);
  out.features = torch::leaky_relu(b.features, 0.2);
  out.latents = b.latents;
  auto c = to_rgb->forward(out.features, out.latents, dup_out, noise_source, capture);
  out.rgb = upsample(rgb_accum) + c.features;
  if (capture) {
    out.attention = {*a.feature_attention, *b.feature_attention, *c.feature_attention};
  }
  return out;
}

ScamGeneratorImpl::ScamGeneratorImpl(const GeneratorConfig& config) : config_(config) {
  config_.validate();
  const auto ch = config_.block_channels();
  mask_encoder = register_module(
      "mask_encoder",
      ConvLayer(ConvSpec{config_.num_labels, ch.at(0), 3, 1, 1, config_.spectral_norm}));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int64_t j = 0; j < config_.num_blocks; ++j) {
    const auto out = ch.at(std::min<int64_t>(j + 1, config_.num_blocks - 1));
    blocks->push_back(ScamBlock(config_, ch.at(j), out));
  }
}

GeneratorOutput ScamGeneratorImpl::forward(const LatentSet& latents, const SemanticMask& mask,
                                           std::optional<at::Generator> noise_source,
                                           bool capture) {
  if (mask.height() != config_.image_size || mask.width() != config_.image_size) {
    throw ShapeError("generator expects a " + std::to_string(config_.image_size) + "px mask, got " +
                     std::to_string(mask.height()) + "x" + std::to_string(mask.width()));
  }
  if (mask.num_labels != config_.num_labels || latents.m() != config_.k * config_.num_labels ||
      latents.d() != config_.d) {
    throw ShapeError("latent set or mask does not match the generator configuration");
  }
  if (latents.batch() != mask.batch()) throw ShapeError("latent and mask batch sizes differ");

  const auto base = config_.base_resolution();
  const auto dtype = latents.values.scalar_type();
  auto x = mask_encoder->forward(one_hot(downsample_mask(mask, base, base), dtype));
  auto rgb = torch::zeros({mask.batch(), 3, base, base}, latents.values.options());
  auto z = latents.values;

  GeneratorOutput out;
  int64_t j = 0;
  for (const auto& module : *blocks) {
    auto res = module->as<ScamBlockImpl>()->forward(x, rgb, z, mask, noise_source, capture);
    if (capture) {
      for (int64_t op = 0; op < 3; ++op) {
        const auto side = op == 0 ? x.size(2) : 2 * x.size(2);
        out.attention.push_back(CapturedAttention{j, op, side, side, res.attention[op]});
      }
    }
    x = std::move(res.features);
    rgb = std::move(res.rgb);
    z = std::move(res.latents);
    ++j;
  }
  out.image = torch::tanh(rgb);
  out.latents = z;
  return out;
}

}  // namespace scam
