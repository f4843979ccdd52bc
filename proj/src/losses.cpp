#include "scam/losses.hpp"

#include <cmath>

#include "scam/errors.hpp"

namespace scam {

void LossWeights::validate() const {
  if (lambda_perc < 0 || lambda_l1 < 0 || lambda_gan < 0) {
    throw ConfigError("loss weights must be non-negative");
  }
}

torch::Tensor hinge_d(const torch::Tensor& real_scores, const torch::Tensor& fake_scores) {
  return torch::relu(1.0 - real_scores).mean() + torch::relu(1.0 + fake_scores).mean();
}

torch::Tensor hinge_g(const torch::Tensor& fake_scores) { return -fake_scores.mean(); }

torch::Tensor l1_loss(const torch::Tensor& x, const torch::Tensor& x_hat) {
  if (x.sizes() != x_hat.sizes()) throw ShapeError("L1 operands differ in shape");
  return (x - x_hat).abs().mean();
}

RandomConvExtractor::RandomConvExtractor(uint64_t seed, std::vector<int64_t> channels,
                                         torch::Dtype dtype) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int64_t in = 3;
  for (auto out : channels) {
    const double scale = std::sqrt(2.0 / static_cast<double>(in * 9));
    weights_.push_back(
        (torch::randn({out, in, 3, 3}, gen, torch::TensorOptions().dtype(torch::kFloat64)) * scale)
            .to(dtype));
    biases_.push_back(torch::zeros({out}, torch::TensorOptions().dtype(dtype)));
    in = out;
  }
}

std::vector<torch::Tensor> RandomConvExtractor::taps(const torch::Tensor& images) {
  namespace F = torch::nn::functional;
  std::vector<torch::Tensor> out;
  auto x = images;
  for (size_t i = 0; i < weights_.size(); ++i) {
    auto w = weights_[i].to(x.scalar_type());
    auto b = biases_[i].to(x.scalar_type());
    x = F::conv2d(x, w, F::Conv2dFuncOptions().bias(b).stride(i == 0 ? 1 : 2).padding(1));
    x = torch::leaky_relu(x, 0.2);
    out.push_back(x);
  }
  return out;
}

torch::Tensor perceptual_loss(const torch::Tensor& x, const torch::Tensor& x_hat,
                              FeatureExtractor& extractor) {
  auto a = extractor.taps(x);
  auto b = extractor.taps(x_hat);
  if (a.size() != b.size() || a.size() != extractor.tap_count()) {
    throw ShapeError("feature extractor returned an inconsistent number of taps");
  }
  auto total = torch::zeros({}, x.options());
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].sizes() != b[i].sizes()) throw ShapeError("feature extractor tap shapes differ");
    total = total + (a[i] - b[i]).abs().mean();
  }
  return total;
}

torch::Tensor total_generator_loss(const torch::Tensor& gan, const torch::Tensor& perc,
                                   const torch::Tensor& l1, const LossWeights& weights) {
  return weights.lambda_gan * gan + weights.lambda_perc * perc + weights.lambda_l1 * l1;
}

}  // namespace scam
