#pragma once

// Dataset-level evaluation shared by the CLI and the acceptance harness.
// Report keys: psnr, psnr_baseline, r_fid, s_fid, reid_sim, reid_acc.

#include <torch/torch.h>

#include <string>
#include <vector>

#include "scam/data.hpp"
#include "scam/metrics.hpp"
#include "scam/model.hpp"
#include "scam/transfer.hpp"

namespace scam {

/// Per-label mean colour [B, s, 3] (float64) and presence flags [B, s].
struct RegionColors {
  torch::Tensor mean;
  torch::Tensor present;
};

RegionColors region_colors(const torch::Tensor& images, const SemanticMask& mask);

/// Every pixel replaced by the mean colour of its label region in the same
/// image: the best reconstruction available from the mask plus one colour per
/// region.
torch::Tensor region_mean_image(const torch::Tensor& images, const SemanticMask& mask);

struct EvaluationOptions {
  int64_t batch_size = 16;
  int64_t transfer_pairs = 50;
  std::vector<int64_t> background_labels = {0};
  /// Draw generator noise from a generator seeded with `seed`; off gives the
  /// noiseless mean output.
  bool noise = false;
  uint64_t seed = 0;
};

/// Subject i, background (i + N/2) mod N, for i < min(pairs, N).
struct TransferPairs {
  std::vector<int64_t> subject;
  std::vector<int64_t> background;
};

TransferPairs fixed_pairs(int64_t dataset_size, int64_t pairs);

torch::Tensor reconstruct_all(ScamModel& model, const InMemoryDataset& data,
                              const EvaluationOptions& options);

/// Subject-transfer output for each pair, generated on the subject's mask.
torch::Tensor transfer_all(ScamModel& model, const InMemoryDataset& data, const TransferPairs& pairs,
                           const MixPlan& plan, const EvaluationOptions& options);

MetricReport evaluate_model(ScamModel& model, const InMemoryDataset& train,
                            const InMemoryDataset& test, Embedder& embedder,
                            const EvaluationOptions& options = {});

/// PNG images of two directories paired by sorted file name (images/ is used
/// when present). Reports psnr and r_fid.
MetricReport evaluate_directories(const std::string& reference, const std::string& candidate,
                                  Embedder& embedder);

}  // namespace scam
