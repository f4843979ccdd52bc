#include "scam/metrics.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "scam/errors.hpp"

namespace scam {

namespace {

double psnr_from_mse(double mse, double max_value) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(max_value * max_value / mse));
}

torch::Tensor cosine_rows(const torch::Tensor& a, const torch::Tensor& b) {
  auto x = a.to(torch::kFloat64);
  auto y = b.to(torch::kFloat64);
  auto denom = x.norm(2, 1) * y.norm(2, 1);
  return (x * y).sum(1) / denom.clamp_min(1e-300);
}

void check_pair(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.dim() != 2 || a.sizes() != b.sizes()) {
    throw ShapeError(std::string(what) + " expects two [N, D] matrices of equal shape");
  }
  if (a.size(0) == 0) throw DataError(std::string(what) + " needs at least one row");
}

}  // namespace

double psnr(const torch::Tensor& x, const torch::Tensor& x_hat, double max_value) {
  if (x.sizes() != x_hat.sizes()) throw ShapeError("psnr operands differ in shape");
  const auto mse = (x.to(torch::kFloat64) - x_hat.to(torch::kFloat64)).pow(2).mean().item<double>();
  return psnr_from_mse(mse, max_value);
}

std::vector<double> psnr_per_item(const torch::Tensor& x, const torch::Tensor& x_hat,
                                  double max_value) {
  if (x.sizes() != x_hat.sizes() || x.dim() < 1) throw ShapeError("psnr operands differ in shape");
  auto mse = (x.to(torch::kFloat64) - x_hat.to(torch::kFloat64)).pow(2).flatten(1).mean(1);
  std::vector<double> out;
  for (int64_t i = 0; i < mse.size(0); ++i) out.push_back(psnr_from_mse(mse[i].item<double>(), max_value));
  return out;
}

void EmbeddingSet::validate(int64_t min_rows) const {
  if (!vectors.defined() || vectors.dim() != 2) throw ShapeError("embedding set must be [N, D]");
  if (vectors.size(0) < min_rows) {
    throw DataError("embedding set '" + source + "' has " + std::to_string(vectors.size(0)) +
                    " rows, need at least " + std::to_string(min_rows));
  }
  if (!torch::isfinite(vectors).all().item<bool>()) {
    throw NumericError("embedding set '" + source + "' contains non-finite values");
  }
}

double frechet_distance(const EmbeddingSet& a, const EmbeddingSet& b, double jitter) {
  a.validate(2);
  b.validate(2);
  if (a.vectors.size(1) != b.vectors.size(1)) throw ShapeError("embedding dimensions differ");
  auto stats = [](const torch::Tensor& v) {
    auto x = v.to(torch::kFloat64);
    auto mu = x.mean(0);
    auto c = x - mu;
    auto cov = c.t().matmul(c) / static_cast<double>(x.size(0) - 1);
    return std::make_pair(mu, cov);
  };
  auto [mu_a, cov_a] = stats(a.vectors);
  auto [mu_b, cov_b] = stats(b.vectors);
  const auto dim = cov_a.size(0);
  auto eye = torch::eye(dim, torch::kFloat64) * jitter;
  cov_a = cov_a + eye;
  cov_b = cov_b + eye;

  // sqrt(Sa) from its eigendecomposition, then tr((Sa Sb)^(1/2)) as the sum of
  // square roots of eig(sqrt(Sa) Sb sqrt(Sa)).
  auto [ea, va] = torch::linalg_eigh(cov_a);
  auto sqrt_a = va.matmul(torch::diag(ea.clamp_min(0).sqrt())).matmul(va.t());
  auto inner = sqrt_a.matmul(cov_b).matmul(sqrt_a);
  inner = (inner + inner.t()) * 0.5;
  auto ev = torch::linalg_eigvalsh(inner);
  const double tr_sqrt = ev.clamp_min(0).sqrt().sum().item<double>();

  const double mean_term = (mu_a - mu_b).pow(2).sum().item<double>();
  const double trace_term =
      cov_a.trace().item<double>() + cov_b.trace().item<double>() - 2.0 * tr_sqrt;
  // rounding can leave a tiny negative value for identical sets
  return std::max(0.0, mean_term + trace_term);
}

torch::Tensor IdentityEmbedder::embed(const torch::Tensor& images) {
  return images.flatten(1).to(torch::kFloat64);
}

RandomConvEmbedder::RandomConvEmbedder(uint64_t seed, std::vector<int64_t> channels) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  int64_t in = 3;
  for (auto out : channels) {
    const double scale = std::sqrt(2.0 / static_cast<double>(in * 9));
    weights_.push_back(torch::randn({out, in, 3, 3}, gen, torch::kFloat64) * scale);
    in = out;
  }
}

torch::Tensor RandomConvEmbedder::embed(const torch::Tensor& images) {
  namespace F = torch::nn::functional;
  torch::NoGradGuard no_grad;
  auto x = images.to(torch::kFloat64);
  for (const auto& w : weights_) {
    x = torch::leaky_relu(F::conv2d(x, w, F::Conv2dFuncOptions().stride(2).padding(1)), 0.2);
  }
  return x.mean({2, 3});
}

EmbeddingSet embed_all(Embedder& embedder, const torch::Tensor& images, const std::string& source,
                       int64_t batch_size) {
  if (images.dim() != 4) throw ShapeError("embed_all expects [N, 3, H, W]");
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> parts;
  for (int64_t i = 0; i < images.size(0); i += batch_size) {
    parts.push_back(embedder.embed(images.slice(0, i, std::min(i + batch_size, images.size(0)))));
  }
  if (parts.empty()) throw DataError("no images to embed for '" + source + "'");
  return EmbeddingSet{torch::cat(parts, 0), source};
}

double r_fid(const torch::Tensor& reference, const torch::Tensor& reconstructed, Embedder& embedder) {
  return frechet_distance(embed_all(embedder, reference, "reference"),
                          embed_all(embedder, reconstructed, "reconstructed"));
}

double s_fid(const torch::Tensor& reference, const torch::Tensor& transferred, Embedder& embedder) {
  return frechet_distance(embed_all(embedder, reference, "reference"),
                          embed_all(embedder, transferred, "transfer"));
}

double reid_sim(const torch::Tensor& subject, const torch::Tensor& transfer) {
  check_pair(subject, transfer, "reid_sim");
  return cosine_rows(subject, transfer).mean().item<double>();
}

double reid_acc(const torch::Tensor& subject, const torch::Tensor& background,
                const torch::Tensor& transfer) {
  check_pair(subject, transfer, "reid_acc");
  check_pair(background, transfer, "reid_acc");
  auto wins = cosine_rows(transfer, subject).gt(cosine_rows(transfer, background));
  return wins.to(torch::kFloat64).mean().item<double>();
}

std::string MetricReport::flat() const {
  std::string out;
  char buf[64];
  for (const auto& [name, value] : values) {
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    out += name + "=" + buf + "\n";
  }
  return out;
}

std::string MetricReport::table() const {
  size_t width = 6;
  for (const auto& entry : values) width = std::max(width, entry.first.size());
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-*s  %12s\n", static_cast<int>(width), "metric", "value");
  out += buf;
  for (const auto& [name, value] : values) {
    std::snprintf(buf, sizeof(buf), "%-*s  %12.4f\n", static_cast<int>(width), name.c_str(), value);
    out += buf;
  }
  return out;
}

}  // namespace scam
