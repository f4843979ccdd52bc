#include "scam/discriminator.hpp"

#include <algorithm>

#include "scam/errors.hpp"

namespace scam {

void DiscriminatorConfig::validate() const {
  if (num_layers < 1) throw ConfigError("discriminator needs at least one layer");
  if (base_channels < 1 || num_labels < 1) {
    throw ConfigError("discriminator channels and label count must be positive");
  }
}

PatchDiscriminatorImpl::PatchDiscriminatorImpl(const DiscriminatorConfig& config)
    : config_(config) {
  config_.validate();
  layers = register_module("layers", torch::nn::ModuleList());
  int64_t in = 3 + config_.num_labels;
  int64_t out = config_.base_channels;
  for (int64_t i = 0; i < config_.num_layers; ++i) {
    layers->push_back(ConvLayer(ConvSpec{in, out, 4, 2, 1, config_.spectral_norm}));
    in = out;
    out = std::min<int64_t>(out * 2, 512);
  }
  layers->push_back(ConvLayer(ConvSpec{in, 1, 3, 1, 1, config_.spectral_norm}));
}

torch::Tensor PatchDiscriminatorImpl::forward(const torch::Tensor& image,
                                              const SemanticMask& mask) {
  if (image.dim() != 4 || image.size(1) != 3) throw ShapeError("discriminator expects [B, 3, H, W]");
  if (image.size(0) != mask.batch() || image.size(2) != mask.height() ||
      image.size(3) != mask.width()) {
    throw ShapeError("image and mask dimensions differ");
  }
  auto x = torch::cat({image, one_hot(mask, image.scalar_type())}, 1);
  const auto last = layers->size() - 1;
  for (size_t i = 0; i < layers->size(); ++i) {
    x = layers[i]->as<ConvLayerImpl>()->forward(x);
    if (i != last) x = torch::leaky_relu(x, 0.2);
  }
  return x;
}

torch::Tensor PatchDiscriminatorImpl::score(const torch::Tensor& image, const SemanticMask& mask,
                                            bool create_graph) {
  if (!config_.use_gradnorm) return forward(image, mask);
  torch::AutoGradMode enable(true);
  auto input = image.requires_grad() ? image : image.detach().requires_grad_(true);
  auto raw = forward(input, mask);
  return gradnorm_scale(raw, input_gradient_norm(raw, input, create_graph));
}

torch::Tensor gradnorm_scale(const torch::Tensor& scores, const torch::Tensor& grad_norm,
                             double eps) {
  std::vector<int64_t> shape(scores.dim(), 1);
  shape[0] = scores.size(0);
  auto norm = grad_norm.reshape(shape);
  return scores / (norm + scores.abs() + eps);
}

torch::Tensor input_gradient_norm(const torch::Tensor& scores, const torch::Tensor& input,
                                  bool create_graph) {
  auto per_item = scores.flatten(1).mean(1).sum();
  auto grads = torch::autograd::grad({per_item}, {input}, {}, /*retain_graph=*/true,
                                     create_graph, /*allow_unused=*/false);
  return grads[0].flatten(1).norm(2, 1);
}

}  // namespace scam
