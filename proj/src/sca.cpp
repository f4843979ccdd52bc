#include "scam/sca.hpp"

#include <cmath>
#include <sstream>

#include "scam/errors.hpp"

namespace scam {

namespace {

std::string shape_str(const torch::Tensor& t) {
  std::ostringstream os;
  os << t.sizes();
  return os.str();
}

torch::Tensor split_heads(const torch::Tensor& x, int64_t heads) {
  const auto b = x.size(0), n = x.size(1), c = x.size(2);
  return x.reshape({b, n, heads, c / heads}).transpose(1, 2);
}

}  // namespace

torch::Tensor masked_attention(const torch::Tensor& q, const torch::Tensor& k,
                               const torch::Tensor& v, const torch::Tensor& mask,
                               int64_t heads, double tau, AttentionRecord* record) {
  if (q.dim() != 3 || k.dim() != 3 || v.dim() != 3) {
    throw ShapeError("attention inputs must be [B, N, C] token matrices");
  }
  if (heads < 1 || q.size(2) % heads != 0 || v.size(2) % heads != 0) {
    throw ShapeError("attention and value widths must be divisible by the head count");
  }
  if (k.size(2) != q.size(2) || k.size(1) != v.size(1)) {
    throw ShapeError("query/key widths or key/value counts disagree");
  }
  auto m = mask.dim() == 2 ? mask.unsqueeze(0) : mask;
  if (m.dim() != 3 || m.size(1) != q.size(1) || m.size(2) != k.size(1) ||
      (m.size(0) != q.size(0) && m.size(0) != 1)) {
    throw ShapeError("mask shape " + shape_str(mask) + " does not match " +
                     std::to_string(q.size(1)) + " queries x " + std::to_string(k.size(1)) +
                     " keys");
  }
  if (m.ne(0).logical_and(m.ne(1)).any().item<bool>()) {
    throw ShapeError("attention mask must be binary");
  }
  m = m.to(q.scalar_type()).unsqueeze(1);

  const double scale = 1.0 / std::sqrt(static_cast<double>(q.size(2) / heads));
  auto qh = split_heads(q, heads);
  auto kh = split_heads(k, heads);
  auto vh = split_heads(v, heads);

  auto logits = torch::matmul(qh, kh.transpose(-2, -1));
  logits = (logits * m + tau * (1.0 - m)) * scale;
  auto weights = torch::softmax(logits, -1) * m;
  if (record != nullptr) record->weights = weights;

  auto out = torch::matmul(weights, vh);
  return out.transpose(1, 2).reshape({q.size(0), q.size(1), v.size(2)});
}

SemanticCrossAttentionImpl::SemanticCrossAttentionImpl(const ScaOptions& options)
    : options_(options) {
  if (options.query_dim <= 0 || options.key_dim <= 0 || options.attention_dim <= 0 ||
      options.value_dim <= 0) {
    throw ShapeError("attention dimensions must be positive");
  }
  if (options.heads < 1 || options.attention_dim % options.heads != 0 ||
      options.value_dim % options.heads != 0) {
    throw ShapeError("attention/value dims must be divisible by the head count");
  }
  if (options.tau > -1e9) throw ShapeError("mask fill value must be <= -1e9");
  q_proj = register_module("q_proj", torch::nn::Linear(options.query_dim, options.attention_dim));
  k_proj = register_module("k_proj", torch::nn::Linear(options.key_dim, options.attention_dim));
  v_proj = register_module("v_proj", torch::nn::Linear(options.key_dim, options.value_dim));
}

ScaOutput SemanticCrossAttentionImpl::forward(const torch::Tensor& queries,
                                              const torch::Tensor& keys,
                                              const torch::Tensor& mask, bool capture) {
  if (queries.dim() != 3 || queries.size(2) != options_.query_dim) {
    throw ShapeError("query tokens " + shape_str(queries) + " do not have width " +
                     std::to_string(options_.query_dim));
  }
  if (keys.dim() != 3 || keys.size(2) != options_.key_dim) {
    throw ShapeError("key tokens " + shape_str(keys) + " do not have width " +
                     std::to_string(options_.key_dim));
  }
  ScaOutput out;
  AttentionRecord record;
  out.tokens = masked_attention(q_proj(queries), k_proj(keys), v_proj(keys), mask,
                                options_.heads, options_.tau, capture ? &record : nullptr);
  if (capture) out.record = std::move(record);
  return out;
}

ScaOutput sca_pixels_to_latents(SemanticCrossAttention& sca, const torch::Tensor& features,
                                const LatentSet& latents, const DuplicatedMask& dup,
                                bool capture) {
  if (dup.n() != features.size(1) || dup.m() != latents.m()) {
    throw ShapeError("duplicated mask does not match pixel/latent counts");
  }
  return sca->forward(features, latents.values, dup.bits, capture);
}

ScaOutput sca_latents_to_pixels(SemanticCrossAttention& sca, const LatentSet& latents,
                                const torch::Tensor& features, const DuplicatedMask& dup,
                                bool capture) {
  if (dup.n() != features.size(1) || dup.m() != latents.m()) {
    throw ShapeError("duplicated mask does not match pixel/latent counts");
  }
  return sca->forward(latents.values, features, dup.bits.transpose(1, 2), capture);
}

ScaOutput sca_latents_self(SemanticCrossAttention& sca, const LatentSet& latents,
                           const LatentGroupMask& group, bool capture) {
  if (group.m() != latents.m()) throw ShapeError("group mask does not match latent count");
  return sca->forward(latents.values, latents.values, group.bits, capture);
}

}  // namespace scam
