#include "scam/viz.hpp"

#include <cmath>

#include "scam/errors.hpp"

namespace scam {

namespace {

constexpr Rgb kTable[] = {
    {230, 25, 75},   {60, 180, 75},   {255, 225, 25},  {0, 130, 200},   {245, 130, 48},
    {145, 30, 180},  {70, 240, 240},  {240, 50, 230},  {210, 245, 60},  {250, 190, 212},
    {0, 128, 128},   {220, 190, 255}, {170, 110, 40},  {255, 250, 200}, {128, 0, 0},
    {170, 255, 195}, {128, 128, 0},   {255, 215, 180}, {0, 0, 128},     {128, 128, 128},
    {255, 255, 255}, {0, 0, 0},
};

Rgb hsv_color(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h * 6.0, 6.0);
  const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  auto q = [&](double u) { return static_cast<uint8_t>(std::lround((u + m) * 255.0)); };
  return {q(r), q(g), q(b)};
}

}  // namespace

std::vector<Rgb> latent_palette(int64_t m) {
  std::vector<Rgb> out;
  const int64_t fixed = sizeof(kTable) / sizeof(kTable[0]);
  for (int64_t i = 0; i < m; ++i) {
    if (i < fixed) {
      out.push_back(kTable[i]);
    } else {
      // golden-ratio hue walk for indices past the table
      const double h = std::fmod(0.61803398875 * static_cast<double>(i), 1.0);
      out.push_back(hsv_color(h, 0.55 + 0.4 * ((i / 3) % 2), 0.6 + 0.35 * (i % 2)));
    }
  }
  return out;
}

torch::Tensor attention_argmax(const AttentionRecord& record, int64_t height, int64_t width) {
  const auto& w = record.weights;
  if (w.dim() != 4 || w.size(2) != height * width) {
    throw ShapeError("attention record does not cover a " + std::to_string(height) + "x" +
                     std::to_string(width) + " map");
  }
  auto mean = w.detach().to(torch::kFloat64).mean(1).contiguous();  // [B, n, m]
  const auto b = mean.size(0), n = mean.size(1), m = mean.size(2);
  auto winners = torch::empty({b, n}, torch::kInt64);
  auto* src = mean.data_ptr<double>();
  auto* dst = winners.data_ptr<int64_t>();
  for (int64_t row = 0; row < b * n; ++row) {
    const double* p = src + row * m;
    int64_t best = 0;
    for (int64_t j = 1; j < m; ++j) {
      if (p[j] > p[best]) best = j;
    }
    dst[row] = best;
  }
  return winners.view({b, height, width});
}

torch::Tensor paint(const torch::Tensor& winners, const std::vector<Rgb>& palette) {
  auto flat = winners.contiguous().flatten();
  auto out = torch::empty({flat.numel(), 3}, torch::kUInt8);
  auto* idx = flat.data_ptr<int64_t>();
  auto* px = out.data_ptr<uint8_t>();
  for (int64_t i = 0; i < flat.numel(); ++i) {
    if (idx[i] < 0 || idx[i] >= static_cast<int64_t>(palette.size())) {
      throw DataError("palette has no colour for latent " + std::to_string(idx[i]));
    }
    for (int c = 0; c < 3; ++c) px[i * 3 + c] = palette[idx[i]][c];
  }
  auto shape = winners.sizes().vec();
  shape.push_back(3);
  return out.view(shape);
}

const CapturedAttention& select_attention(const GeneratorOutput& output,
                                          const AttentionSelector& selector) {
  if (output.attention.empty()) throw UsageError("generator output carries no attention capture");
  const auto blocks = output.attention.back().block + 1;
  const auto block = selector.block < 0 ? blocks + selector.block : selector.block;
  for (const auto& cap : output.attention) {
    if (cap.block == block && cap.op == selector.op) return cap;
  }
  throw UsageError("no feature-SCA capture at block " + std::to_string(selector.block) +
                   ", op " + std::to_string(selector.op) + " (generator has " +
                   std::to_string(blocks) + " blocks, ops 0-2)");
}

AttentionMap visualize_attention(ScamModel& model, const torch::Tensor& image,
                                 const SemanticMask& mask, const AttentionSelector& selector,
                                 std::optional<at::Generator> noise) {
  torch::NoGradGuard no_grad;
  auto latents = model->encode(image, mask);
  auto out = model->generate(latents, mask, std::move(noise), /*capture=*/true);
  const auto& cap = select_attention(out, selector);
  AttentionMap map;
  map.block = cap.block;
  map.op = cap.op;
  map.winners = attention_argmax(cap.record, cap.height, cap.width);
  map.image = paint(map.winners, latent_palette(latents.m()));
  return map;
}

}  // namespace scam
