#include "scam/layers.hpp"

namespace scam {

namespace F = torch::nn::functional;

ConvLayerImpl::ConvLayerImpl(const ConvSpec& spec) : spec_(spec) {
  conv = register_module(
      "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(spec.in_channels, spec.out_channels,
                                                         spec.kernel)
                                    .stride(spec.stride)
                                    .padding(spec.padding)));
  if (spec.spectral_norm) {
    u_ = register_buffer("u", F::normalize(torch::randn({spec.out_channels}),
                                           F::NormalizeFuncOptions().dim(0)));
  }
}

torch::Tensor ConvLayerImpl::effective_weight() {
  if (!spec_.spectral_norm) return conv->weight;
  auto w = conv->weight.reshape({spec_.out_channels, -1});
  torch::Tensor u = u_, v;
  {
    torch::NoGradGuard no_grad;
    auto wd = w.detach();
    v = F::normalize(torch::mv(wd.t(), u), F::NormalizeFuncOptions().dim(0).eps(1e-12));
    if (is_training()) {
      u = F::normalize(torch::mv(wd, v), F::NormalizeFuncOptions().dim(0).eps(1e-12));
      u_.copy_(u);
      u = u_.clone();
    }
  }
  auto sigma = torch::dot(u, torch::mv(w, v));
  return conv->weight / sigma;
}

torch::Tensor ConvLayerImpl::forward(const torch::Tensor& x) {
  if (!spec_.spectral_norm) return conv->forward(x);
  return F::conv2d(x, effective_weight(),
                   F::Conv2dFuncOptions().bias(conv->bias).stride(spec_.stride).padding(
                       spec_.padding));
}

torch::Tensor instance_norm(const torch::Tensor& x, double eps) {
  auto mean = x.mean({2, 3}, true);
  auto var = (x - mean).pow(2).mean({2, 3}, true);
  return (x - mean) / torch::sqrt(var + eps);
}

int64_t count_parameters(const torch::nn::Module& module) {
  int64_t total = 0;
  for (const auto& p : module.parameters()) {
    if (p.requires_grad()) total += p.numel();
  }
  return total;
}

}  // namespace scam
