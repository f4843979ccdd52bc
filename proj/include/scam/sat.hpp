#pragma once

#include <torch/torch.h>

#include "scam/sca.hpp"

namespace scam {

/// Which tensor the second residual connection adds back.
enum class ResidualMode {
  block_input,   // LN(f(a) + primary): both residuals add the block input
  intermediate,  // LN(f(a) + a), the usual transformer arrangement
};

struct SatOptions {
  int64_t primary_dim = 0;
  int64_t context_dim = 0;
  int64_t attention_dim = 0;
  int64_t heads = 4;
  int64_t ffn_hidden = 0;  // 0 selects 2 * primary_dim
  double tau = -1e9;
  ResidualMode residual = ResidualMode::block_input;
};

/// Transformer-style unit with semantic cross attention in place of self attention:
///   a   = LN(SCA(primary, context, mask) + primary)
///   out = LN(f(a) + primary)        (or + a in ResidualMode::intermediate)
/// with f a two-layer GELU feed-forward network.
class SatOperationImpl : public torch::nn::Module {
 public:
  explicit SatOperationImpl(const SatOptions& options);

  torch::Tensor forward(const torch::Tensor& primary, const torch::Tensor& context,
                        const torch::Tensor& mask);

  /// Same as forward, also returning the attention weights of the inner SCA.
  std::pair<torch::Tensor, AttentionRecord> forward_captured(const torch::Tensor& primary,
                                                             const torch::Tensor& context,
                                                             const torch::Tensor& mask);

  const SatOptions& options() const { return options_; }

  SemanticCrossAttention sca{nullptr};
  torch::nn::LayerNorm norm1{nullptr};
  torch::nn::LayerNorm norm2{nullptr};
  torch::nn::Linear ffn_in{nullptr};
  torch::nn::Linear ffn_out{nullptr};

 private:
  torch::Tensor finish(const torch::Tensor& primary, const torch::Tensor& attended);

  SatOptions options_;
};
TORCH_MODULE(SatOperation);

}  // namespace scam
