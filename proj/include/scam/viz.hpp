#pragma once

// Attention-argmax maps: every pixel painted with the colour of the latent it
// attends most in a chosen generator feature-SCA.

#include <torch/torch.h>

#include <array>
#include <optional>
#include <vector>

#include "scam/generator.hpp"
#include "scam/model.hpp"

namespace scam {

using Rgb = std::array<uint8_t, 3>;

/// Deterministic colour per latent index; at least `m` entries.
std::vector<Rgb> latent_palette(int64_t m);

struct AttentionMap {
  torch::Tensor winners;  // int64 [B, h, w], latent index per pixel
  torch::Tensor image;    // uint8 [B, h, w, 3]
  int64_t block = 0;
  int64_t op = 0;
};

/// Per-pixel argmax over the head-averaged weights of `record`; ties go to
/// the lowest latent index.
torch::Tensor attention_argmax(const AttentionRecord& record, int64_t height, int64_t width);

torch::Tensor paint(const torch::Tensor& winners, const std::vector<Rgb>& palette);

/// Picks the capture named by `selector` (negative block counts from the
/// end). Throws UsageError when it is out of range.
const CapturedAttention& select_attention(const GeneratorOutput& output,
                                          const AttentionSelector& selector);

/// Reconstructs `image` with capture enabled and maps the selected
/// feature-SCA. The default selector is the last block's second operation.
AttentionMap visualize_attention(ScamModel& model, const torch::Tensor& image,
                                 const SemanticMask& mask, const AttentionSelector& selector = {},
                                 std::optional<at::Generator> noise = std::nullopt);

}  // namespace scam
