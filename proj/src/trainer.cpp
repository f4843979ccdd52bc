#include "scam/trainer.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>
#include <sstream>

#include "scam/errors.hpp"

namespace scam {

namespace {

constexpr const char* kFormatTag = "scam-trainer";

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  // splitmix64 finaliser, so neighbouring seeds give unrelated streams
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

torch::optim::AdamWOptions adamw_options(const TrainConfig& t, double lr) {
  return torch::optim::AdamWOptions(lr)
      .betas(std::make_tuple(t.beta1, t.beta2))
      .weight_decay(t.weight_decay);
}

bool all_finite(const std::vector<torch::Tensor>& params) {
  for (const auto& p : params) {
    if (p.grad().defined() && !torch::isfinite(p.grad()).all().item<bool>()) return false;
  }
  return true;
}

std::string describe_batch(const std::vector<int64_t>& indices, const torch::Tensor& fake) {
  std::ostringstream os;
  os << "batch items [";
  for (size_t i = 0; i < indices.size(); ++i) os << (i ? "," : "") << indices[i];
  os << "]";
  if (fake.defined()) {
    auto bad = (~torch::isfinite(fake.detach())).flatten(1).any(1).nonzero().flatten();
    if (bad.numel() > 0) {
      os << ", non-finite reconstruction at batch position(s) ";
      for (int64_t i = 0; i < bad.numel(); ++i) os << (i ? "," : "") << bad[i].item<int64_t>();
    }
  }
  return os.str();
}

void add_module_blobs(CheckpointFile& file, const std::string& prefix,
                      const torch::nn::Module& module) {
  for (const auto& p : module.named_parameters()) {
    file.blobs.emplace_back(prefix + "/" + p.key(), p.value().detach().clone());
  }
  for (const auto& b : module.named_buffers()) {
    file.blobs.emplace_back(prefix + "/" + b.key(), b.value().detach().clone());
  }
}

void restore_module(const CheckpointFile& file, const std::string& prefix,
                    torch::nn::Module& module) {
  torch::NoGradGuard no_grad;
  auto copy = [&](const std::string& key, torch::Tensor& dst) {
    const auto& src = file.blob(prefix + "/" + key);
    if (src.sizes() != dst.sizes() || src.scalar_type() != dst.scalar_type()) {
      throw DataError("checkpoint tensor " + prefix + "/" + key + " has the wrong shape or dtype");
    }
    dst.copy_(src);
  };
  for (auto& p : module.named_parameters()) copy(p.key(), p.value());
  for (auto& b : module.named_buffers()) copy(b.key(), b.value());
}

void add_optimizer_blobs(CheckpointFile& file, const std::string& prefix,
                         const torch::optim::AdamW& opt, const torch::nn::Module& module) {
  const auto& state = opt.state();
  for (const auto& p : module.named_parameters()) {
    auto it = state.find(p.value().unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& s = static_cast<const torch::optim::AdamWParamState&>(*it->second);
    const auto base = prefix + "/" + p.key();
    file.blobs.emplace_back(base + "/step", torch::tensor(s.step(), torch::kInt64));
    file.blobs.emplace_back(base + "/exp_avg", s.exp_avg().detach().clone());
    file.blobs.emplace_back(base + "/exp_avg_sq", s.exp_avg_sq().detach().clone());
  }
}

void restore_optimizer(const CheckpointFile& file, const std::string& prefix,
                       torch::optim::AdamW& opt, const torch::nn::Module& module) {
  auto& state = opt.state();
  state.clear();
  for (const auto& p : module.named_parameters()) {
    const auto base = prefix + "/" + p.key();
    if (!file.has_blob(base + "/step")) continue;
    auto s = std::make_unique<torch::optim::AdamWParamState>();
    s->step(file.blob(base + "/step").item<int64_t>());
    s->exp_avg(file.blob(base + "/exp_avg").clone());
    s->exp_avg_sq(file.blob(base + "/exp_avg_sq").clone());
    if (s->exp_avg().sizes() != p.value().sizes()) {
      throw DataError("optimizer state " + base + " has the wrong shape");
    }
    state[p.value().unsafeGetTensorImpl()] = std::move(s);
  }
}

void set_requires_grad(torch::nn::Module& module, bool on) {
  for (auto& p : module.parameters()) p.set_requires_grad(on);
}

}  // namespace

bool is_resumable_key(const std::string& key) {
  return key == "train.steps" || key == "train.checkpoint_every" || key == "train.log_every";
}

Trainer::Trainer(const RunConfig& config)
    : config_(config),
      perceptual_(config.train.perceptual_seed),
      noise_rng_(at::make_generator<at::CPUGeneratorImpl>(derive_seed(config.train.seed, 1))),
      data_rng_(at::make_generator<at::CPUGeneratorImpl>(derive_seed(config.train.seed, 2))) {
  config_.validate();
  torch::manual_seed(derive_seed(config_.train.seed, 0));
  model_ = ScamModel(config_.model);
  discriminator_ = PatchDiscriminator(config_.model.discriminator());
  opt_eg_ = std::make_unique<torch::optim::AdamW>(model_->parameters(),
                                                  adamw_options(config_.train, config_.train.lr_eg));
  opt_d_ = std::make_unique<torch::optim::AdamW>(discriminator_->parameters(),
                                                 adamw_options(config_.train, config_.train.lr_d));
}

KeyValueConfig checkpoint_config(const CheckpointFile& file) {
  auto fmt = file.manifest.find("format");
  if (fmt == file.manifest.end() || fmt->second != kFormatTag) {
    throw DataError("checkpoint was not written by the trainer");
  }
  KeyValueConfig kv;
  for (const auto& [key, value] : file.manifest) {
    if (key.rfind("config.", 0) == 0) kv.set(key.substr(7), value);
  }
  return kv;
}

ScamModel load_model(const CheckpointFile& file, const KeyValueConfig& overrides) {
  auto kv = checkpoint_config(file);
  for (const auto& [key, value] : overrides.values()) kv.set(key, value);
  auto config = to_run_config(kv);
  config.model.validate();
  ScamModel model(config.model);
  restore_module(file, "model", *model);
  model->eval();
  return model;
}

std::unique_ptr<Trainer> Trainer::from_checkpoint(const std::string& path) {
  auto file = read_checkpoint(path);
  auto trainer = std::make_unique<Trainer>(to_run_config(checkpoint_config(file)));
  trainer->restore(file);
  return trainer;
}

Batch Trainer::sample_batch(const InMemoryDataset& data) {
  if (data.size() == 0) throw DataError("cannot sample from an empty dataset");
  auto idx = torch::randint(data.size(), {config_.train.batch_size}, data_rng_,
                            torch::TensorOptions().dtype(torch::kInt64));
  last_indices_.assign(idx.data_ptr<int64_t>(), idx.data_ptr<int64_t>() + idx.numel());
  return data.batch(idx);
}

StepMetrics Trainer::train_step(const Batch& batch, const std::vector<int64_t>& indices) {
  model_->train();
  discriminator_->train();
  const auto& ids = indices.empty() ? last_indices_ : indices;
  const auto& real = batch.images;
  const auto& mask = batch.masks;
  const auto& w = config_.loss;

  auto fake = model_->reconstruct(real, mask, noise_rng_);

  // discriminator update on real vs detached reconstruction
  opt_d_->zero_grad();
  auto real_scores = discriminator_->score(real, mask, true);
  auto fake_scores = discriminator_->score(fake.detach(), mask, true);
  auto d_loss = hinge_d(real_scores, fake_scores);
  const double d_value = d_loss.item<double>();
  if (!std::isfinite(d_value)) {
    throw NumericError("non-finite discriminator loss at step " + std::to_string(step_ + 1) +
                       ", " + describe_batch(ids, fake));
  }
  d_loss.backward();
  if (!all_finite(discriminator_->parameters())) {
    throw NumericError("non-finite discriminator gradient at step " + std::to_string(step_ + 1) +
                       ", " + describe_batch(ids, fake));
  }
  opt_d_->step();

  // encoder + generator update against the updated discriminator
  opt_eg_->zero_grad();
  set_requires_grad(*discriminator_, false);
  torch::Tensor gan = torch::zeros({}, real.options());
  try {
    if (w.lambda_gan != 0.0) gan = hinge_g(discriminator_->score(fake, mask, true));
  } catch (...) {
    set_requires_grad(*discriminator_, true);
    throw;
  }
  auto perc = perceptual_loss(real, fake, perceptual_);
  auto l1 = scam::l1_loss(real, fake);
  auto total = total_generator_loss(gan, perc, l1, w);
  const double g_value = total.item<double>();
  if (!std::isfinite(g_value)) {
    set_requires_grad(*discriminator_, true);
    throw NumericError("non-finite generator loss at step " + std::to_string(step_ + 1) + ", " +
                       describe_batch(ids, fake));
  }
  total.backward();
  set_requires_grad(*discriminator_, true);
  if (!all_finite(model_->parameters())) {
    throw NumericError("non-finite generator gradient at step " + std::to_string(step_ + 1) +
                       ", " + describe_batch(ids, fake));
  }
  opt_eg_->step();
  ++step_;

  StepMetrics m;
  m.step = step_;
  m.d_loss = d_value;
  m.g_gan = gan.item<double>();
  m.perceptual = perc.item<double>();
  m.l1 = l1.item<double>();
  m.g_total = g_value;
  history_.push_back(m);
  return m;
}

void Trainer::fit(const InMemoryDataset& data, const std::string& checkpoint_path,
                  const std::function<void(const StepMetrics&)>& on_step) {
  const auto every = config_.train.checkpoint_every;
  while (step_ < config_.train.steps) {
    auto batch = sample_batch(data);
    auto m = train_step(batch);
    if (on_step) on_step(m);
    if (!checkpoint_path.empty() && every > 0 && step_ % every == 0) save(checkpoint_path);
  }
  if (!checkpoint_path.empty()) save(checkpoint_path);
}

CheckpointFile Trainer::state() const {
  CheckpointFile file;
  file.manifest["format"] = kFormatTag;
  file.manifest["step"] = std::to_string(step_);
  const auto kv = to_key_values(config_);
  for (const auto& [key, value] : kv.values()) file.manifest["config." + key] = value;
  add_module_blobs(file, "model", *model_);
  add_module_blobs(file, "discriminator", *discriminator_);
  add_optimizer_blobs(file, "optim_eg", *opt_eg_, *model_);
  add_optimizer_blobs(file, "optim_d", *opt_d_, *discriminator_);
  auto noise = noise_rng_;
  auto data = data_rng_;
  file.blobs.emplace_back("rng/noise", noise.get_state());
  file.blobs.emplace_back("rng/data", data.get_state());
  return file;
}

void Trainer::save(const std::string& path) const { write_checkpoint(state(), path); }

void Trainer::restore(const CheckpointFile& file) {
  auto fmt = file.manifest.find("format");
  if (fmt == file.manifest.end() || fmt->second != kFormatTag) {
    throw DataError("checkpoint was not written by the trainer");
  }
  const auto mine = to_key_values(config_).values();
  for (const auto& [key, value] : mine) {
    if (is_resumable_key(key)) continue;
    auto it = file.manifest.find("config." + key);
    if (it == file.manifest.end()) throw ConfigError("checkpoint lacks config key " + key);
    if (it->second != value) {
      throw ConfigError("checkpoint config mismatch for " + key + ": checkpoint has '" +
                        it->second + "', current run has '" + value + "'");
    }
  }
  restore_module(file, "model", *model_);
  restore_module(file, "discriminator", *discriminator_);
  restore_optimizer(file, "optim_eg", *opt_eg_, *model_);
  restore_optimizer(file, "optim_d", *opt_d_, *discriminator_);
  noise_rng_.set_state(file.blob("rng/noise"));
  data_rng_.set_state(file.blob("rng/data"));
  step_ = std::stoll(file.manifest.at("step"));
  history_.clear();
  last_indices_.clear();
}

void Trainer::load(const std::string& path) { restore(read_checkpoint(path)); }

}  // namespace scam
