#include "scam/masks.hpp"

#include <cmath>
#include <sstream>

#include "scam/errors.hpp"

namespace scam {

SemanticMask SemanticMask::from_labels(torch::Tensor labels, int64_t num_labels) {
  if (labels.dim() == 2) labels = labels.unsqueeze(0);
  SemanticMask mask{labels.to(torch::kInt64).contiguous(), num_labels};
  mask.validate();
  return mask;
}

SemanticMask SemanticMask::slice(int64_t begin, int64_t end) const {
  return SemanticMask{labels.slice(0, begin, end), num_labels};
}

void SemanticMask::validate() const {
  if (num_labels < 1) throw ShapeError("semantic mask needs at least one label");
  if (!labels.defined() || labels.dim() != 3) {
    throw ShapeError("semantic mask must be a [B, H, W] label map");
  }
  if (labels.scalar_type() != torch::kInt64) throw ShapeError("semantic mask labels must be int64");
  if (labels.numel() == 0) return;
  const auto lo = labels.min().item<int64_t>();
  const auto hi = labels.max().item<int64_t>();
  if (lo < 0 || hi >= num_labels) {
    std::ostringstream os;
    os << "label out of range: found [" << lo << ", " << hi << "] with " << num_labels
       << " labels";
    throw DataError(os.str());
  }
}

torch::Tensor LatentSet::label_rows(int64_t label) const {
  return values.slice(1, label * k, (label + 1) * k);
}

void LatentSet::validate() const {
  if (!values.defined() || values.dim() != 3) throw ShapeError("latent set must be [B, m, d]");
  if (values.size(1) != k * num_labels) {
    std::ostringstream os;
    os << "latent count " << values.size(1) << " != k * s = " << k * num_labels;
    throw ShapeError(os.str());
  }
  if (!torch::isfinite(values).all().item<bool>()) throw NumericError("non-finite latent values");
}

DuplicatedMask duplicate_mask(const SemanticMask& mask, int64_t k, torch::Dtype dtype) {
  if (k < 1) throw ShapeError("k must be positive");
  auto flat = mask.labels.reshape({mask.batch(), mask.pixels()});
  auto planes = torch::one_hot(flat, mask.num_labels).to(dtype);
  return DuplicatedMask{planes.repeat_interleave(k, -1).contiguous(), k, mask.num_labels};
}

LatentGroupMask build_latent_group_mask(int64_t num_labels, int64_t k, torch::Dtype dtype) {
  if (num_labels < 1 || k < 1) throw ShapeError("latent group mask needs s >= 1 and k >= 1");
  auto group = torch::arange(num_labels * k, torch::kInt64).div(k, "floor");
  auto bits = group.unsqueeze(1).eq(group.unsqueeze(0)).to(dtype);
  return LatentGroupMask{bits, k};
}

SemanticMask downsample_mask(const SemanticMask& mask, int64_t target_h, int64_t target_w) {
  if (target_h < 1 || target_w < 1 || target_h > mask.height() || target_w > mask.width()) {
    std::ostringstream os;
    os << "cannot downsample " << mask.height() << "x" << mask.width() << " mask to "
       << target_h << "x" << target_w;
    throw ShapeError(os.str());
  }
  if (target_h == mask.height() && target_w == mask.width()) return mask;
  auto rows = torch::arange(target_h, torch::kInt64).mul(mask.height()).div(target_h, "floor");
  auto cols = torch::arange(target_w, torch::kInt64).mul(mask.width()).div(target_w, "floor");
  auto labels = mask.labels.index_select(1, rows).index_select(2, cols).contiguous();
  return SemanticMask{labels, mask.num_labels};
}

torch::Tensor one_hot(const SemanticMask& mask, torch::Dtype dtype) {
  return torch::one_hot(mask.labels, mask.num_labels).permute({0, 3, 1, 2}).to(dtype).contiguous();
}

torch::Tensor positional_encoding_2d(int64_t h, int64_t w, int64_t channels, torch::Dtype dtype) {
  if (channels <= 0 || channels % 4 != 0) {
    throw ShapeError("positional encoding channels must be a positive multiple of 4, got " +
                     std::to_string(channels));
  }
  const int64_t pairs = channels / 4;
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto freq = torch::pow(10000.0, -torch::arange(pairs, opts) / static_cast<double>(pairs));

  // [len, 2 * pairs] with columns (sin f0, cos f0, sin f1, cos f1, ...)
  auto axis = [&](int64_t len) {
    auto angle = torch::arange(len, opts).unsqueeze(1) * freq.unsqueeze(0);
    return torch::stack({angle.sin(), angle.cos()}, -1).reshape({len, 2 * pairs});
  };
  auto ys = axis(h).t().unsqueeze(2).expand({2 * pairs, h, w});
  auto xs = axis(w).t().unsqueeze(1).expand({2 * pairs, h, w});
  return torch::cat({ys, xs}, 0).to(dtype).contiguous();
}

torch::Tensor flatten_pixels(const torch::Tensor& features) {
  return features.flatten(2).transpose(1, 2);
}

torch::Tensor unflatten_pixels(const torch::Tensor& tokens, int64_t h, int64_t w) {
  return tokens.transpose(1, 2).reshape({tokens.size(0), tokens.size(2), h, w});
}

}  // namespace scam
