#include "scam/evaluate.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "scam/errors.hpp"
#include "scam/image_io.hpp"

namespace scam {

namespace fs = std::filesystem;

namespace {

std::optional<at::Generator> noise_source(ScamModel& model, const EvaluationOptions& options) {
  model->set_noise_active(options.noise);
  if (!options.noise) return std::nullopt;
  return at::make_generator<at::CPUGeneratorImpl>(options.seed);
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<fs::path> png_files(const std::string& dir) {
  fs::path base(dir);
  if (fs::is_directory(base / "images")) base /= "images";
  if (!fs::is_directory(base)) throw DataError("not a directory: " + dir);
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(base)) {
    if (e.path().extension() == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no PNG images in " + base.string());
  return out;
}

torch::Tensor load_images(const std::vector<fs::path>& files) {
  std::vector<torch::Tensor> images;
  for (const auto& f : files) {
    images.push_back(to_signed_unit(read_rgb_png(f.string())));
    if (images.back().sizes() != images.front().sizes()) {
      throw DataError(f.string() + ": image size differs from the rest of the directory");
    }
  }
  return torch::stack(images);
}

}  // namespace

RegionColors region_colors(const torch::Tensor& images, const SemanticMask& mask) {
  auto onehot = one_hot(mask, torch::kFloat64).flatten(2);          // [B, s, n]
  auto pixels = images.to(torch::kFloat64).flatten(2);               // [B, 3, n]
  auto counts = onehot.sum(2);                                       // [B, s]
  auto sums = onehot.matmul(pixels.transpose(1, 2));                 // [B, s, 3]
  return RegionColors{sums / counts.clamp_min(1).unsqueeze(2), counts.gt(0)};
}

torch::Tensor region_mean_image(const torch::Tensor& images, const SemanticMask& mask) {
  auto colors = region_colors(images, mask).mean;                    // [B, s, 3]
  auto onehot = one_hot(mask, torch::kFloat64).flatten(2);           // [B, s, n]
  auto painted = colors.transpose(1, 2).matmul(onehot);              // [B, 3, n]
  return painted.view(images.sizes()).to(images.scalar_type());
}

TransferPairs fixed_pairs(int64_t dataset_size, int64_t pairs) {
  if (dataset_size < 2) throw DataError("subject transfer needs at least two images");
  TransferPairs out;
  const auto count = std::min(pairs, dataset_size);
  for (int64_t i = 0; i < count; ++i) {
    out.subject.push_back(i);
    out.background.push_back((i + dataset_size / 2) % dataset_size);
  }
  return out;
}

torch::Tensor reconstruct_all(ScamModel& model, const InMemoryDataset& data,
                              const EvaluationOptions& options) {
  torch::NoGradGuard no_grad;
  model->eval();
  auto noise = noise_source(model, options);
  std::vector<torch::Tensor> out;
  for (int64_t i = 0; i < data.size(); i += options.batch_size) {
    auto batch = data.range(i, std::min(i + options.batch_size, data.size()));
    out.push_back(model->reconstruct(batch.images, batch.masks, noise));
  }
  model->set_noise_active(true);
  return torch::cat(out, 0);
}

torch::Tensor transfer_all(ScamModel& model, const InMemoryDataset& data, const TransferPairs& pairs,
                           const MixPlan& plan, const EvaluationOptions& options) {
  torch::NoGradGuard no_grad;
  model->eval();
  auto noise = noise_source(model, options);
  std::vector<torch::Tensor> out;
  const auto n = static_cast<int64_t>(pairs.subject.size());
  for (int64_t i = 0; i < n; i += options.batch_size) {
    const auto end = std::min(i + options.batch_size, n);
    auto s = torch::tensor(std::vector<int64_t>(pairs.subject.begin() + i, pairs.subject.begin() + end));
    auto b = torch::tensor(
        std::vector<int64_t>(pairs.background.begin() + i, pairs.background.begin() + end));
    auto subject = data.batch(s);
    auto background = data.batch(b);
    SubjectTransferRequest request{subject.images, subject.masks, background.images,
                                   background.masks, std::nullopt, plan};
    out.push_back(subject_transfer(model, request, noise));
  }
  model->set_noise_active(true);
  return torch::cat(out, 0);
}

MetricReport evaluate_model(ScamModel& model, const InMemoryDataset& train,
                            const InMemoryDataset& test, Embedder& embedder,
                            const EvaluationOptions& options) {
  auto all = test.range(0, test.size());
  auto recon = reconstruct_all(model, test, options);
  auto baseline = region_mean_image(all.images, all.masks);

  auto pairs = fixed_pairs(test.size(), options.transfer_pairs);
  auto plan = MixPlan::standard(test.num_labels, options.background_labels);
  auto transfers = transfer_all(model, test, pairs, plan, options);
  auto subjects = all.images.index_select(0, torch::tensor(pairs.subject));
  auto backgrounds = all.images.index_select(0, torch::tensor(pairs.background));

  auto e_subject = embed_all(embedder, subjects, "subject").vectors;
  auto e_background = embed_all(embedder, backgrounds, "background").vectors;
  auto e_transfer = embed_all(embedder, transfers, "transfer").vectors;

  MetricReport report;
  report.add("psnr", mean_of(psnr_per_item(all.images, recon, 2.0)));
  report.add("psnr_baseline", mean_of(psnr_per_item(all.images, baseline, 2.0)));
  report.add("r_fid", r_fid(train.images, recon, embedder));
  report.add("s_fid", s_fid(all.images, transfers, embedder));
  report.add("reid_sim", reid_sim(e_subject, e_transfer));
  report.add("reid_acc", reid_acc(e_subject, e_background, e_transfer));
  return report;
}

MetricReport evaluate_directories(const std::string& reference, const std::string& candidate,
                                  Embedder& embedder) {
  auto ref_files = png_files(reference);
  auto cand_files = png_files(candidate);
  if (ref_files.size() != cand_files.size()) {
    throw DataError("directories hold different numbers of images (" +
                    std::to_string(ref_files.size()) + " vs " + std::to_string(cand_files.size()) +
                    ")");
  }
  for (size_t i = 0; i < ref_files.size(); ++i) {
    if (ref_files[i].filename() != cand_files[i].filename()) {
      throw DataError("unpaired image " + cand_files[i].filename().string());
    }
  }
  auto ref = load_images(ref_files);
  auto cand = load_images(cand_files);
  if (ref.sizes() != cand.sizes()) throw DataError("reference and candidate image sizes differ");
  MetricReport report;
  report.add("psnr", mean_of(psnr_per_item(ref, cand, 2.0)));
  report.add("r_fid", r_fid(ref, cand, embedder));
  return report;
}

}  // namespace scam
