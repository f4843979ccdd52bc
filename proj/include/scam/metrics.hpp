#pragma once

// Reconstruction and transfer metrics: PSNR, Frechet distance over embedding
// sets (R-FID / S-FID), and cosine re-identification scores.

#include <torch/torch.h>

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace scam {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(max_value^2 / MSE) over all elements; capped at kPsnrCap.
double psnr(const torch::Tensor& x, const torch::Tensor& x_hat, double max_value);

/// Per-item PSNR over a [B, ...] batch.
std::vector<double> psnr_per_item(const torch::Tensor& x, const torch::Tensor& x_hat,
                                  double max_value);

/// N x D embedding matrix.
struct EmbeddingSet {
  torch::Tensor vectors;
  std::string source;

  int64_t size() const { return vectors.size(0); }
  void validate(int64_t min_rows = 1) const;
};

/// |mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)), evaluated in float64.
/// The square-root trace comes from the eigenvalues of sqrt(Sa) Sb sqrt(Sa),
/// a symmetric matrix similar to Sa Sb; tiny negative eigenvalues clamp to 0
/// and both covariances get `jitter` on the diagonal. Covariances use N - 1.
/// The result is clamped at 0.
double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b, double jitter = 1e-6);

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// [B, 3, H, W] images to [B, D] vectors.
  virtual torch::Tensor embed(const torch::Tensor& images) = 0;
};

/// Flattened pixels.
class IdentityEmbedder : public Embedder {
 public:
  torch::Tensor embed(const torch::Tensor& images) override;
};

/// Fixed-seed random conv stack followed by global average pooling.
class RandomConvEmbedder : public Embedder {
 public:
  explicit RandomConvEmbedder(uint64_t seed = 11, std::vector<int64_t> channels = {32, 64, 64});
  torch::Tensor embed(const torch::Tensor& images) override;

 private:
  std::vector<torch::Tensor> weights_;
};

/// Embeds in batches of `batch_size` (embeddings of different batches are
/// concatenated, so the statistics do not depend on the batching).
EmbeddingSet embed_all(Embedder& embedder, const torch::Tensor& images, const std::string& source,
                       int64_t batch_size = 64);

/// Frechet distance between the embedded train set and reconstructed test set.
double r_fid(const torch::Tensor& reference, const torch::Tensor& reconstructed, Embedder& embedder);

/// Frechet distance between the embedded test set and subject-transfer outputs.
double s_fid(const torch::Tensor& reference, const torch::Tensor& transferred, Embedder& embedder);

/// Mean cosine similarity of matching rows.
double reid_sim(const torch::Tensor& subject, const torch::Tensor& transfer);

/// Fraction of rows whose transfer embedding is strictly closer (cosine) to
/// the subject than to the background; ties count as misses.
double reid_acc(const torch::Tensor& subject, const torch::Tensor& background,
                const torch::Tensor& transfer);

/// Ordered metric=value report.
struct MetricReport {
  std::vector<std::pair<std::string, double>> values;

  void add(const std::string& name, double value) { values.emplace_back(name, value); }
  /// `name=value` lines, one per metric, in insertion order.
  std::string flat() const;
  /// Aligned two-column table.
  std::string table() const;
};

}  // namespace scam
