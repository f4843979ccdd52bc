#pragma once

// Semantic cross attention: scaled dot-product attention whose logits are
// hard-masked so each query only sees the keys of its own label group.

#include <torch/torch.h>

#include <optional>

#include "scam/masks.hpp"

namespace scam {

struct ScaOptions {
  int64_t query_dim = 0;      // token width of the attending side
  int64_t key_dim = 0;        // token width of the attended side
  int64_t attention_dim = 0;  // internal Q/K width, split across heads
  int64_t value_dim = 0;      // output width, split across heads
  int64_t heads = 4;
  double tau = -1e9;          // fill value for masked logits
};

/// Post-softmax weights, [B, heads, queries, keys]. Rows sum to one or are
/// identically zero when the mask row is empty.
struct AttentionRecord {
  torch::Tensor weights;

  int64_t query_count() const { return weights.size(2); }
  int64_t key_count() const { return weights.size(3); }
};

struct ScaOutput {
  torch::Tensor tokens;  // [B, queries, value_dim]
  std::optional<AttentionRecord> record;
};

/// Multi-head masked attention over already projected inputs.
///
/// q, k: [B, Nq, A] / [B, Nk, A]; v: [B, Nk, V]; mask: [B, Nq, Nk] or
/// [Nq, Nk], binary. Logits are formed as (q k^T * mask + tau (1 - mask)) /
/// sqrt(A / heads) and the softmax output is multiplied by the mask again, so
/// masked weights are exactly zero and empty rows produce zero output.
torch::Tensor masked_attention(const torch::Tensor& q, const torch::Tensor& k,
                               const torch::Tensor& v, const torch::Tensor& mask,
                               int64_t heads, double tau, AttentionRecord* record = nullptr);

class SemanticCrossAttentionImpl : public torch::nn::Module {
 public:
  explicit SemanticCrossAttentionImpl(const ScaOptions& options);

  ScaOutput forward(const torch::Tensor& queries, const torch::Tensor& keys,
                    const torch::Tensor& mask, bool capture = false);

  const ScaOptions& options() const { return options_; }

  torch::nn::Linear q_proj{nullptr};
  torch::nn::Linear k_proj{nullptr};
  torch::nn::Linear v_proj{nullptr};

 private:
  ScaOptions options_;
};
TORCH_MODULE(SemanticCrossAttention);

/// Pixels attend the latents of their own label. features: [B, n, C].
ScaOutput sca_pixels_to_latents(SemanticCrossAttention& sca, const torch::Tensor& features,
                                const LatentSet& latents, const DuplicatedMask& dup,
                                bool capture = false);

/// Latents attend the pixels of their own label; latents of absent labels get zeros.
ScaOutput sca_latents_to_pixels(SemanticCrossAttention& sca, const LatentSet& latents,
                                const torch::Tensor& features, const DuplicatedMask& dup,
                                bool capture = false);

/// Latents attend the latents of their own label.
ScaOutput sca_latents_self(SemanticCrossAttention& sca, const LatentSet& latents,
                           const LatentGroupMask& group, bool capture = false);

}  // namespace scam
