#pragma once

#include <ATen/CPUGeneratorImpl.h>
#include <torch/torch.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "scam/config.hpp"
#include "scam/data.hpp"
#include "scam/image_io.hpp"
#include "scam/masks.hpp"
#include "scam/model.hpp"

namespace testutil {

inline at::Generator rng(uint64_t seed) { return at::make_generator<at::CPUGeneratorImpl>(seed); }

inline scam::SemanticMask random_mask(int64_t b, int64_t h, int64_t w, int64_t s, uint64_t seed) {
  auto labels = torch::randint(s, {b, h, w}, rng(seed), torch::TensorOptions().dtype(torch::kInt64));
  return scam::SemanticMask{labels, s};
}

/// Label map split into vertical bands, so every label owns whole regions.
inline scam::SemanticMask band_mask(int64_t b, int64_t h, int64_t w, int64_t s) {
  auto labels = torch::empty({b, h, w}, torch::kInt64);
  auto acc = labels.accessor<int64_t, 3>();
  for (int64_t i = 0; i < b; ++i)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) acc[i][y][x] = (x * s) / w;
  return scam::SemanticMask{labels, s};
}

/// Small model: 8px images, s = 3, k = 2, d = 8.
inline scam::ModelConfig tiny_model(int64_t k = 2) {
  scam::ModelConfig c;
  c.image_size = 8;
  c.num_labels = 3;
  c.k = k;
  c.d = 8;
  c.attention_dim = 8;
  c.heads = 2;
  c.encoder_blocks = 2;
  c.encoder_channels = {8, 8};
  c.generator_blocks = 2;
  c.generator_channels = {8, 8};
  c.discriminator_layers = 2;
  c.discriminator_channels = 8;
  return c;
}

inline scam::RunConfig tiny_run(uint64_t seed = 0) {
  scam::RunConfig r;
  r.model = tiny_model();
  r.train.batch_size = 2;
  r.train.seed = seed;
  r.train.steps = 3;
  r.train.log_every = 0;
  r.train.checkpoint_every = 0;
  return r;
}

/// In-memory synthetic shapes split, generated without touching disk.
inline scam::InMemoryDataset tiny_dataset(int64_t count, int64_t size = 8, uint64_t seed = 0,
                                          int64_t num_labels = 3) {
  scam::SyntheticSpec spec;
  spec.image_size = size;
  spec.num_labels = num_labels;
  spec.seed = seed;
  scam::InMemoryDataset data;
  data.num_labels = num_labels;
  std::vector<torch::Tensor> images, labels;
  for (int64_t i = 0; i < count; ++i) {
    auto sample = scam::synthesize_sample(spec, 0, i);
    images.push_back(scam::to_signed_unit(sample.rgb));
    labels.push_back(sample.labels);
    data.stems.push_back(std::to_string(i));
  }
  data.images = torch::stack(images);
  data.labels = torch::stack(labels);
  return data;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() /
           (name + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str(const std::string& child = "") const { return (path / child).string(); }
};

struct GradCheck {
  double worst = 0;  // worst per-tensor relative error
  std::string worst_name;
  int64_t checked = 0;
};

/// Central finite differences on up to `per_tensor` elements of every named
/// double tensor, compared with autograd. The per-tensor error is
/// |analytic - numeric| / max(|analytic|, |numeric|) over the checked
/// elements (absolute when both norms are below 1e-9).
inline GradCheck gradient_check(const std::function<torch::Tensor()>& loss_fn,
                                const std::vector<std::pair<std::string, torch::Tensor>>& tensors,
                                int64_t per_tensor = 12, double eps = 1e-6, uint64_t seed = 3) {
  for (const auto& [name, t] : tensors) {
    if (t.grad().defined()) t.grad().zero_();
  }
  loss_fn().backward();
  std::mt19937_64 pick(seed);
  GradCheck result;
  for (const auto& [name, t] : tensors) {
    auto grad = t.grad().defined() ? t.grad().contiguous() : torch::zeros_like(t);
    const int64_t n = t.numel();
    std::vector<int64_t> idx(n);
    for (int64_t i = 0; i < n; ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), pick);
    if (n > per_tensor) idx.resize(per_tensor);
    double diff = 0, na = 0, nn = 0;
    for (auto i : idx) {
      double numeric = 0;
      {
        torch::NoGradGuard guard;
        auto* p = t.data_ptr<double>() + i;
        const double orig = *p;
        *p = orig + eps;
        const double up = loss_fn().item<double>();
        *p = orig - eps;
        const double down = loss_fn().item<double>();
        *p = orig;
        numeric = (up - down) / (2 * eps);
      }
      const double analytic = grad.data_ptr<double>()[i];
      diff += (analytic - numeric) * (analytic - numeric);
      na += analytic * analytic;
      nn += numeric * numeric;
      ++result.checked;
    }
    const double scale = std::max(std::sqrt(na), std::sqrt(nn));
    const double err = scale < 1e-9 ? std::sqrt(diff) : std::sqrt(diff) / scale;
    if (err > result.worst) {
      result.worst = err;
      result.worst_name = name;
    }
  }
  return result;
}

/// Every named parameter of a module, for gradient_check.
inline std::vector<std::pair<std::string, torch::Tensor>> named_params(
    const torch::nn::Module& module) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : module.named_parameters()) out.emplace_back(p.key(), p.value());
  return out;
}

}  // namespace testutil
