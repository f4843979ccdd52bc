#pragma once

// Semantic cross attention modulation generator: progressive-growing blocks
// that refine latents, modulate feature maps by attending the latents of
// each pixel's label, and accumulate an RGB image.

#include <torch/torch.h>

#include <optional>
#include <vector>

#include "scam/layers.hpp"
#include "scam/masks.hpp"
#include "scam/sat.hpp"

namespace scam {

enum class UpsampleMode { nearest, bilinear };

struct GeneratorConfig {
  int64_t num_blocks = 7;
  int64_t image_size = 256;
  /// Feature channels entering each block; empty selects default_channels().
  std::vector<int64_t> channels;
  int64_t d = 256;
  int64_t k = 8;
  int64_t num_labels = 3;
  bool use_latent_sat = true;
  bool noise_enabled = true;
  UpsampleMode upsample = UpsampleMode::nearest;
  int64_t attention_dim = 256;
  int64_t heads = 4;
  double tau = -1e9;
  ResidualMode residual = ResidualMode::block_input;
  bool spectral_norm = false;

  /// Encoder schedule reversed: 64 * 2^(L_G - 1 - j), capped at 512.
  static std::vector<int64_t> default_channels(int64_t num_blocks);

  std::vector<int64_t> block_channels() const;
  /// Spatial size of the initial feature map; every block doubles it.
  int64_t base_resolution() const { return image_size >> num_blocks; }
  void validate() const;
};

struct ScamOperationOptions {
  int64_t in_channels = 0;
  int64_t out_channels = 0;
  int64_t d = 0;
  int64_t attention_dim = 0;
  int64_t heads = 4;
  double tau = -1e9;
  ResidualMode residual = ResidualMode::block_input;
  bool use_latent_sat = true;
  bool noise_enabled = true;
  bool spectral_norm = false;
};

struct ScamOperationOutput {
  torch::Tensor features;  // [B, out_channels, H, W]
  torch::Tensor latents;   // [B, m, d]
  std::optional<AttentionRecord> feature_attention;
};

/// (a) latent SAT: z_out = SAT(z_in, x_in, S)
/// (b) feature SCA: x_sca = SCA(x_in, z_out, S)
/// (c) modulation: x_out = g(gamma(x_sca) * IN(x_in) + mu(x_sca) + N),
///     N ~ N(0, sigma^2) with sigma = |noise_weight|.
class ScamOperationImpl : public torch::nn::Module {
 public:
  explicit ScamOperationImpl(const ScamOperationOptions& options);

  /// `dup` must be at the resolution of `features`. Noise draws from
  /// `noise_source` (the global generator when empty).
  ScamOperationOutput forward(const torch::Tensor& features, const torch::Tensor& latents,
                              const DuplicatedMask& dup,
                              std::optional<at::Generator> noise_source = std::nullopt,
                              bool capture = false);

  /// Current noise scale sigma, a 0-dim tensor (zero when noise is disabled).
  torch::Tensor noise_sigma() const;

  /// Skips the noise draw without touching noise_weight; used for
  /// deterministic inference.
  void set_noise_active(bool active) { noise_active_ = active; }
  bool noise_active() const { return options_.noise_enabled && noise_active_; }

  const ScamOperationOptions& options() const { return options_; }

  SatOperation latent_sat{nullptr};
  SemanticCrossAttention feature_sca{nullptr};
  ConvLayer gamma{nullptr};
  ConvLayer mu{nullptr};
  ConvLayer g{nullptr};
  torch::Tensor noise_weight;

 private:
  ScamOperationOptions options_;
  bool noise_active_ = true;
};
TORCH_MODULE(ScamOperation);

struct ScamBlockOutput {
  torch::Tensor features;
  torch::Tensor rgb;
  torch::Tensor latents;
  /// Feature-SCA weights of the three operations (main, main, RGB) when captured.
  std::vector<AttentionRecord> attention;
};

/// SCAM op -> upsample x2 -> SCAM op -> parallel RGB SCAM op added onto the
/// upsampled RGB accumulator.
class ScamBlockImpl : public torch::nn::Module {
 public:
  ScamBlockImpl(const GeneratorConfig& config, int64_t in_channels, int64_t out_channels);

  ScamBlockOutput forward(const torch::Tensor& features, const torch::Tensor& rgb_accum,
                          const torch::Tensor& latents, const SemanticMask& mask,
                          std::optional<at::Generator> noise_source = std::nullopt,
                          bool capture = false);

  ScamOperation first{nullptr};
  ScamOperation second{nullptr};
  ScamOperation to_rgb{nullptr};

 private:
  torch::Tensor upsample(const torch::Tensor& x) const;

  GeneratorConfig config_;
};
TORCH_MODULE(ScamBlock);

/// Identifies one feature-SCA inside the generator: block index and
/// operation index (0, 1 main path; 2 RGB branch).
struct AttentionSelector {
  int64_t block = -1;  // negative counts from the end
  int64_t op = 1;
};

struct CapturedAttention {
  int64_t block = 0;
  int64_t op = 0;
  int64_t height = 0;
  int64_t width = 0;
  AttentionRecord record;
};

struct GeneratorOutput {
  torch::Tensor image;  // [B, 3, H, W] in [-1, 1]
  torch::Tensor latents;
  std::vector<CapturedAttention> attention;
};

class ScamGeneratorImpl : public torch::nn::Module {
 public:
  explicit ScamGeneratorImpl(const GeneratorConfig& config);

  GeneratorOutput forward(const LatentSet& latents, const SemanticMask& mask,
                          std::optional<at::Generator> noise_source = std::nullopt,
                          bool capture = false);

  const GeneratorConfig& config() const { return config_; }

  ConvLayer mask_encoder{nullptr};
  torch::nn::ModuleList blocks{nullptr};

 private:
  GeneratorConfig config_;
};
TORCH_MODULE(ScamGenerator);

}  // namespace scam
