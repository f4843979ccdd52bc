#pragma once

// Reconstruction-objective adversarial training: per step one discriminator
// update on (real, reconstructed) followed by one encoder+generator update.

#include <torch/torch.h>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "scam/checkpoint.hpp"
#include "scam/config.hpp"
#include "scam/data.hpp"
#include "scam/discriminator.hpp"
#include "scam/losses.hpp"
#include "scam/model.hpp"

namespace scam {

struct StepMetrics {
  int64_t step = 0;  // step count after the update
  double d_loss = 0;
  double g_gan = 0;
  double perceptual = 0;
  double l1 = 0;
  double g_total = 0;
};

class Trainer {
 public:
  /// Seeds weight initialisation, noise and batch sampling from config.train.seed.
  explicit Trainer(const RunConfig& config);

  /// Rebuilds a trainer from the configuration snapshot stored in a checkpoint
  /// and restores its state.
  static std::unique_ptr<Trainer> from_checkpoint(const std::string& path);

  /// Draws batch_size item indices uniformly with replacement.
  Batch sample_batch(const InMemoryDataset& data);

  /// One D update then one E+G update. `indices` names the dataset items of
  /// `batch` for error reports. A non-finite loss or gradient throws
  /// NumericError before the corresponding optimizer step is applied.
  StepMetrics train_step(const Batch& batch, const std::vector<int64_t>& indices = {});

  /// Runs until step() == config.train.steps. `on_step` sees every step;
  /// checkpoints go to checkpoint_path every checkpoint_every steps and at the end
  /// (skipped when the path is empty).
  void fit(const InMemoryDataset& data, const std::string& checkpoint_path = "",
           const std::function<void(const StepMetrics&)>& on_step = {});

  CheckpointFile state() const;
  void save(const std::string& path) const;
  /// Restores weights, optimizer moments, step and RNG streams. Architecture,
  /// loss and optimiser keys must match this trainer's configuration.
  void restore(const CheckpointFile& file);
  void load(const std::string& path);

  int64_t step() const { return step_; }
  const RunConfig& config() const { return config_; }
  ScamModel& model() { return model_; }
  PatchDiscriminator& discriminator() { return discriminator_; }
  const std::vector<StepMetrics>& history() const { return history_; }

 private:
  RunConfig config_;
  ScamModel model_{nullptr};
  PatchDiscriminator discriminator_{nullptr};
  std::unique_ptr<torch::optim::AdamW> opt_eg_;
  std::unique_ptr<torch::optim::AdamW> opt_d_;
  RandomConvExtractor perceptual_;
  at::Generator noise_rng_;
  at::Generator data_rng_;
  int64_t step_ = 0;
  std::vector<int64_t> last_indices_;
  std::vector<StepMetrics> history_;
};

/// Configuration snapshot stored in a trainer checkpoint.
KeyValueConfig checkpoint_config(const CheckpointFile& file);

/// Encoder/generator from a trainer checkpoint. `overrides` are applied on
/// top of the stored configuration; ones that change the parameter set fail
/// with DataError when the weights are copied.
ScamModel load_model(const CheckpointFile& file, const KeyValueConfig& overrides = {});

/// Configuration keys that may differ between a checkpoint and the trainer
/// restoring it (run length and logging cadence).
bool is_resumable_key(const std::string& key);

}  // namespace scam
