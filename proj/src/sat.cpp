#include "scam/sat.hpp"

#include "scam/errors.hpp"

namespace scam {

SatOperationImpl::SatOperationImpl(const SatOptions& options) : options_(options) {
  if (options_.ffn_hidden == 0) options_.ffn_hidden = 2 * options_.primary_dim;
  ScaOptions sca_opts;
  sca_opts.query_dim = options_.primary_dim;
  sca_opts.key_dim = options_.context_dim;
  sca_opts.attention_dim = options_.attention_dim;
  sca_opts.value_dim = options_.primary_dim;
  sca_opts.heads = options_.heads;
  sca_opts.tau = options_.tau;
  sca = register_module("sca", SemanticCrossAttention(sca_opts));
  norm1 = register_module(
      "norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({options_.primary_dim})));
  norm2 = register_module(
      "norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({options_.primary_dim})));
  ffn_in = register_module("ffn_in", torch::nn::Linear(options_.primary_dim, options_.ffn_hidden));
  ffn_out =
      register_module("ffn_out", torch::nn::Linear(options_.ffn_hidden, options_.primary_dim));
}

torch::Tensor SatOperationImpl::finish(const torch::Tensor& primary,
                                       const torch::Tensor& attended) {
  auto a = norm1(attended + primary);
  auto f = ffn_out(torch::gelu(ffn_in(a)));
  const auto& skip = options_.residual == ResidualMode::block_input ? primary : a;
  return norm2(f + skip);
}

torch::Tensor SatOperationImpl::forward(const torch::Tensor& primary,
                                        const torch::Tensor& context,
                                        const torch::Tensor& mask) {
  return finish(primary, sca->forward(primary, context, mask, false).tokens);
}

std::pair<torch::Tensor, AttentionRecord> SatOperationImpl::forward_captured(
    const torch::Tensor& primary, const torch::Tensor& context, const torch::Tensor& mask) {
  auto out = sca->forward(primary, context, mask, true);
  return {finish(primary, out.tokens), *out.record};
}

}  // namespace scam
