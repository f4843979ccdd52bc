#pragma once

// Adversarial hinge losses plus the perceptual and L1 reconstruction terms.
// Every loss is a mean over its elements, so data-parallel shards combine by
// averaging.

#include <torch/torch.h>

#include <memory>
#include <vector>

namespace scam {

struct LossWeights {
  double lambda_perc = 10.0;
  double lambda_l1 = 10.0;
  double lambda_gan = 1.0;  // 0 ablates the adversarial term

  void validate() const;
};

/// mean(max(0, 1 - real)) + mean(max(0, 1 + fake))
torch::Tensor hinge_d(const torch::Tensor& real_scores, const torch::Tensor& fake_scores);

/// -mean(fake): minimising raises the discriminator's score of generated images.
torch::Tensor hinge_g(const torch::Tensor& fake_scores);

torch::Tensor l1_loss(const torch::Tensor& x, const torch::Tensor& x_hat);

/// Source of intermediate feature maps ("taps") for the perceptual distance.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<torch::Tensor> taps(const torch::Tensor& images) = 0;
  virtual size_t tap_count() const = 0;
};

/// Frozen random-weight conv stack (3x3 conv + LeakyReLU per stage, stride 2
/// after the first). Deterministic for a given seed.
class RandomConvExtractor : public FeatureExtractor {
 public:
  explicit RandomConvExtractor(uint64_t seed = 7, std::vector<int64_t> channels = {16, 32, 64},
                               torch::Dtype dtype = torch::kFloat32);

  std::vector<torch::Tensor> taps(const torch::Tensor& images) override;
  size_t tap_count() const override { return weights_.size(); }

 private:
  std::vector<torch::Tensor> weights_;
  std::vector<torch::Tensor> biases_;
};

/// Identity on the input: a single tap equal to the image.
class IdentityExtractor : public FeatureExtractor {
 public:
  std::vector<torch::Tensor> taps(const torch::Tensor& images) override { return {images}; }
  size_t tap_count() const override { return 1; }
};

/// Sum over taps of the mean absolute feature difference.
torch::Tensor perceptual_loss(const torch::Tensor& x, const torch::Tensor& x_hat,
                              FeatureExtractor& extractor);

/// gan * lambda_gan + lambda_perc * perc + lambda_l1 * l1
torch::Tensor total_generator_loss(const torch::Tensor& gan, const torch::Tensor& perc,
                                   const torch::Tensor& l1, const LossWeights& weights);

}  // namespace scam
