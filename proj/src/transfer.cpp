#include "scam/transfer.hpp"

#include <sstream>

#include "scam/errors.hpp"

namespace scam {

namespace {

void check_vocabulary(const SemanticMask& a, const SemanticMask& b, const char* what) {
  if (a.num_labels != b.num_labels) {
    throw DataError(std::string(what) + ": masks use different label vocabularies (" +
                    std::to_string(a.num_labels) + " vs " + std::to_string(b.num_labels) + ")");
  }
}

}  // namespace

MixPlan MixPlan::standard(int64_t num_labels, const std::vector<int64_t>& background_labels) {
  auto plan = uniform(num_labels, LatentSource::subject);
  for (auto l : background_labels) {
    if (l < 0 || l >= num_labels) throw ConfigError("background label " + std::to_string(l) + " out of range");
    plan.sources[l] = LatentSource::background;
  }
  return plan;
}

MixPlan MixPlan::uniform(int64_t num_labels, LatentSource source) {
  if (num_labels < 1) throw ConfigError("a mix plan needs at least one label");
  MixPlan plan;
  plan.sources.assign(num_labels, source);
  return plan;
}

MixPlan MixPlan::parse(const std::string& text, int64_t num_labels) {
  auto plan = standard(num_labels);
  std::stringstream ss(text);
  std::string entry;
  while (std::getline(ss, entry, ',')) {
    if (entry.empty()) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) throw ConfigError("plan entry '" + entry + "' is not label=source");
    int64_t label = 0;
    try {
      size_t used = 0;
      label = std::stoll(entry.substr(0, eq), &used);
      if (used != eq) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("plan entry '" + entry + "' has a non-integer label");
    }
    if (label < 0 || label >= num_labels) {
      throw ConfigError("plan covers unknown label " + std::to_string(label));
    }
    const auto src = entry.substr(eq + 1);
    if (src == "subject") {
      plan.sources[label] = LatentSource::subject;
    } else if (src == "background") {
      plan.sources[label] = LatentSource::background;
    } else {
      throw ConfigError("plan source must be 'subject' or 'background', got '" + src + "'");
    }
  }
  return plan;
}

std::vector<int64_t> MixPlan::background_labels() const {
  std::vector<int64_t> out;
  for (int64_t l = 0; l < num_labels(); ++l) {
    if (sources[l] == LatentSource::background) out.push_back(l);
  }
  return out;
}

std::string MixPlan::to_string() const {
  std::string out;
  for (int64_t l = 0; l < num_labels(); ++l) {
    if (!out.empty()) out += ",";
    out += std::to_string(l) + (sources[l] == LatentSource::subject ? "=subject" : "=background");
  }
  return out;
}

void MixPlan::validate(int64_t expected_labels) const {
  if (num_labels() != expected_labels) {
    throw ConfigError("mix plan assigns " + std::to_string(num_labels()) + " labels, model has " +
                      std::to_string(expected_labels));
  }
}

LatentSet mix_latents(const LatentSet& subject, const LatentSet& background, const MixPlan& plan) {
  subject.validate();
  background.validate();
  if (subject.values.sizes() != background.values.sizes() || subject.k != background.k ||
      subject.num_labels != background.num_labels) {
    throw ShapeError("latent sets to mix differ in shape");
  }
  plan.validate(subject.num_labels);
  std::vector<torch::Tensor> blocks;
  for (int64_t l = 0; l < plan.num_labels(); ++l) {
    const auto& src = plan.sources[l] == LatentSource::subject ? subject : background;
    blocks.push_back(src.label_rows(l));
  }
  return LatentSet{torch::cat(blocks, 1), subject.k, subject.num_labels};
}

torch::Tensor reconstruct(ScamModel& model, const torch::Tensor& image, const SemanticMask& mask,
                          std::optional<at::Generator> noise) {
  return model->reconstruct(image, mask, std::move(noise));
}

torch::Tensor pose_transfer(ScamModel& model, const torch::Tensor& style_image,
                            const SemanticMask& style_mask, const SemanticMask& pose_mask,
                            std::optional<at::Generator> noise) {
  check_vocabulary(style_mask, pose_mask, "pose transfer");
  auto z = model->encode(style_image, style_mask);
  return model->generate(z, pose_mask, std::move(noise)).image;
}

torch::Tensor subject_transfer(ScamModel& model, const SubjectTransferRequest& r,
                               std::optional<at::Generator> noise) {
  check_vocabulary(r.subject_mask, r.background_mask, "subject transfer");
  const auto& pose = r.pose_mask ? *r.pose_mask : r.subject_mask;
  check_vocabulary(r.subject_mask, pose, "subject transfer");
  auto z_background = model->encode(r.background_image, r.background_mask);
  auto z_subject = model->encode(r.subject_image, r.subject_mask);
  auto z_mix = mix_latents(z_subject, z_background, r.plan);
  return model->generate(z_mix, pose, std::move(noise)).image;
}

}  // namespace scam
