#pragma once

// Test-time procedures on a trained encoder/generator pair: reconstruction,
// pose transfer and subject transfer by mixing label-grouped latent blocks.

#include <torch/torch.h>

#include <optional>
#include <string>
#include <vector>

#include "scam/masks.hpp"
#include "scam/model.hpp"

namespace scam {

enum class LatentSource { subject, background };

/// Source of every label's k latents.
struct MixPlan {
  std::vector<LatentSource> sources;  // indexed by label

  /// `background_labels` take BACKGROUND, every other label SUBJECT.
  static MixPlan standard(int64_t num_labels, const std::vector<int64_t>& background_labels = {0});
  static MixPlan uniform(int64_t num_labels, LatentSource source);

  /// "label=subject|background" entries separated by commas, applied on top
  /// of standard(num_labels). Unknown labels or sources raise ConfigError.
  static MixPlan parse(const std::string& text, int64_t num_labels);

  int64_t num_labels() const { return static_cast<int64_t>(sources.size()); }
  std::vector<int64_t> background_labels() const;
  std::string to_string() const;
  void validate(int64_t expected_labels) const;
};

/// Row block [l*k, (l+1)*k) of the result is copied from the source `plan`
/// assigns to label l.
LatentSet mix_latents(const LatentSet& subject, const LatentSet& background, const MixPlan& plan);

torch::Tensor reconstruct(ScamModel& model, const torch::Tensor& image, const SemanticMask& mask,
                          std::optional<at::Generator> noise = std::nullopt);

/// G(E(style_image, style_mask), pose_mask). Labels present only in
/// pose_mask are driven by their query-initialised latents.
torch::Tensor pose_transfer(ScamModel& model, const torch::Tensor& style_image,
                            const SemanticMask& style_mask, const SemanticMask& pose_mask,
                            std::optional<at::Generator> noise = std::nullopt);

struct SubjectTransferRequest {
  torch::Tensor subject_image;
  SemanticMask subject_mask;
  torch::Tensor background_image;
  SemanticMask background_mask;
  /// Layout to generate; the subject's mask when empty.
  std::optional<SemanticMask> pose_mask;
  MixPlan plan;
};

/// G(mix(E(subject), E(background)), pose_mask).
torch::Tensor subject_transfer(ScamModel& model, const SubjectTransferRequest& request,
                               std::optional<at::Generator> noise = std::nullopt);

}  // namespace scam
