#pragma once

// Property checks shared by the unit suite (small counts) and the acceptance
// binary (spec counts). Each returns raw measurements; callers decide.

#include <torch/torch.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "scam/encoder.hpp"
#include "scam/generator.hpp"
#include "scam/layers.hpp"
#include "scam/losses.hpp"
#include "scam/masks.hpp"
#include "scam/metrics.hpp"
#include "scam/model.hpp"
#include "scam/sat.hpp"
#include "scam/sca.hpp"
#include "scam/trainer.hpp"

namespace checks {

inline int64_t uniform_int(std::mt19937_64& gen, int64_t lo, int64_t hi) {
  return std::uniform_int_distribution<int64_t>(lo, hi)(gen);
}

/// Random SCA instances (n <= 64 queries, m <= 24 keys, input widths <= 16)
/// against the subset-softmax oracle, float64. Returns the max abs diff.
inline double sca_oracle_max_diff(int instances, uint64_t seed) {
  std::mt19937_64 gen(seed);
  double worst = 0;
  for (int t = 0; t < instances; ++t) {
    const int64_t n = uniform_int(gen, 1, 64), m = uniform_int(gen, 1, 24);
    const int64_t dq = uniform_int(gen, 1, 16), dk = uniform_int(gen, 1, 16);
    const int64_t heads = uniform_int(gen, 1, 4);
    const int64_t adim = heads * uniform_int(gen, 1, 4), vdim = heads * uniform_int(gen, 1, 4);
    torch::manual_seed(seed * 1000 + t);
    scam::SemanticCrossAttention sca(scam::ScaOptions{dq, dk, adim, vdim, heads, -1e9});
    sca->to(torch::kFloat64);
    auto g = testutil::rng(seed * 7919 + t);
    auto opts = torch::TensorOptions().dtype(torch::kFloat64);
    auto queries = torch::randn({1, n, dq}, g, opts);
    auto keys = torch::randn({1, m, dk}, g, opts);
    const double density = std::uniform_real_distribution<double>(0.05, 1.0)(gen);
    auto mask = torch::rand({n, m}, g, opts).lt(density).to(torch::kFloat64);
    if (n > 1) mask[uniform_int(gen, 0, n - 1)].zero_();  // at least one empty row

    auto got = sca->forward(queries, keys, mask).tokens[0];

    auto q = oracle::linear(oracle::to_matrix(queries[0]), oracle::to_matrix(sca->q_proj->weight),
                            oracle::to_vector(sca->q_proj->bias));
    auto k = oracle::linear(oracle::to_matrix(keys[0]), oracle::to_matrix(sca->k_proj->weight),
                            oracle::to_vector(sca->k_proj->bias));
    auto v = oracle::linear(oracle::to_matrix(keys[0]), oracle::to_matrix(sca->v_proj->weight),
                            oracle::to_vector(sca->v_proj->bias));
    auto expect = oracle::subset_softmax_attention(q, k, v, oracle::to_matrix(mask),
                                                   static_cast<int>(heads));
    auto acc = got.accessor<double, 2>();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < vdim; ++j) worst = std::max(worst, std::abs(acc[i][j] - expect[i][j]));
  }
  return worst;
}

struct LeakCount {
  int64_t violations = 0;  // weights != 0 where the mask is 0
  int64_t checked = 0;     // masked-out weights inspected
};

inline void count_leaks(const torch::Tensor& weights, const torch::Tensor& mask, LeakCount& out) {
  // weights [B, heads, Nq, Nk]; mask [B or 1, Nq, Nk]
  auto outside = mask.eq(0).unsqueeze(1).expand_as(weights);
  out.checked += outside.sum().item<int64_t>();
  out.violations += weights.ne(0).logical_and(outside).sum().item<int64_t>();
}

/// Random forward passes through the three SCA variants plus every
/// generator feature-SCA of a small model, all with capture.
inline LeakCount zero_leak(int passes, uint64_t seed) {
  std::mt19937_64 gen(seed);
  LeakCount total;
  for (int t = 0; t < passes; ++t) {
    const int64_t s = uniform_int(gen, 1, 4), k = uniform_int(gen, 1, 3);
    const int64_t h = uniform_int(gen, 2, 8), w = uniform_int(gen, 2, 8), c = 8, d = 8;
    torch::manual_seed(seed + t);
    auto mask = testutil::random_mask(2, h, w, s, seed * 31 + t);
    // Drop one label entirely so empty rows are exercised.
    if (s > 1) mask.labels.masked_fill_(mask.labels.eq(s - 1), 0);
    auto dup = scam::duplicate_mask(mask, k);
    auto group = scam::build_latent_group_mask(s, k);
    auto features = torch::randn({2, h * w, c});
    scam::LatentSet latents{torch::randn({2, s * k, d}), k, s};

    scam::SemanticCrossAttention p2l(scam::ScaOptions{c, d, 8, d, 2, -1e9});
    scam::SemanticCrossAttention l2p(scam::ScaOptions{d, c, 8, d, 2, -1e9});
    scam::SemanticCrossAttention self(scam::ScaOptions{d, d, 8, d, 2, -1e9});
    count_leaks(scam::sca_pixels_to_latents(p2l, features, latents, dup, true).record->weights,
                dup.bits, total);
    count_leaks(scam::sca_latents_to_pixels(l2p, latents, features, dup, true).record->weights,
                dup.bits.transpose(1, 2), total);
    count_leaks(scam::sca_latents_self(self, latents, group, true).record->weights,
                group.bits.unsqueeze(0), total);

    auto cfg = testutil::tiny_model(k);
    cfg.num_labels = s;
    scam::ScamModel model(cfg);
    auto full = testutil::random_mask(1, cfg.image_size, cfg.image_size, s, seed * 17 + t);
    auto z = model->encode(torch::rand({1, 3, 8, 8}) * 2 - 1, full);
    auto out = model->generate(z, full, testutil::rng(t), true);
    for (const auto& cap : out.attention) {
      auto small = scam::duplicate_mask(scam::downsample_mask(full, cap.height, cap.width), k);
      count_leaks(cap.record.weights, small.bits, total);
    }
  }
  return total;
}

/// Encoder without convolutions: perturb only the pixels of one label and
/// measure the largest change in the latents of every other label.
inline double region_isolation_max_change(int cases, uint64_t seed) {
  std::mt19937_64 gen(seed);
  double worst = 0;
  for (int t = 0; t < cases; ++t) {
    scam::EncoderConfig cfg;
    cfg.num_blocks = 2;
    cfg.k = uniform_int(gen, 1, 3);
    cfg.num_labels = uniform_int(gen, 2, 4);
    cfg.d = 8;
    cfg.attention_dim = 8;
    cfg.heads = 2;
    cfg.conv_channels = {8, 8};
    cfg.use_conv = false;
    torch::manual_seed(seed + t);
    scam::SatEncoder enc(cfg);
    enc->to(torch::kFloat64);
    const int64_t size = 8;
    auto mask = testutil::random_mask(1, size, size, cfg.num_labels, seed * 13 + t);
    const int64_t a = uniform_int(gen, 0, cfg.num_labels - 1);
    auto opts = torch::TensorOptions().dtype(torch::kFloat64);
    auto image = torch::rand({1, 3, size, size}, testutil::rng(t), opts) * 2 - 1;
    auto region = mask.labels.eq(a).unsqueeze(1).to(torch::kFloat64);
    auto perturbed = image + region * torch::randn({1, 3, size, size}, testutil::rng(t + 99), opts);

    torch::NoGradGuard guard;
    auto z0 = enc->forward(image, mask);
    auto z1 = enc->forward(perturbed, mask);
    for (int64_t b = 0; b < cfg.num_labels; ++b) {
      if (b == a) continue;
      worst = std::max(
          worst, (z0.label_rows(b) - z1.label_rows(b)).abs().max().item<double>());
    }
  }
  return worst;
}

struct NamedGradCheck {
  std::string name;
  testutil::GradCheck result;
};

/// Finite-difference checks, float64, of sca, sat_operation and
/// scam_operation (gamma, mu, instance norm, noise sigma, latent SAT).
inline std::vector<NamedGradCheck> gradient_checks(uint64_t seed) {
  std::vector<NamedGradCheck> out;
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  torch::manual_seed(seed);
  const int64_t s = 2, k = 2, h = 3, w = 3, c = 4, d = 4;
  auto mask = testutil::random_mask(1, h, w, s, seed);
  mask.labels[0][0][0] = 0;
  mask.labels[0][0][1] = 1;
  auto dup = scam::duplicate_mask(mask, k, torch::kFloat64);

  {
    scam::SemanticCrossAttention sca(scam::ScaOptions{c, d, 4, 4, 2, -1e9});
    sca->to(torch::kFloat64);
    auto x = torch::randn({1, h * w, c}, opts).requires_grad_();
    auto z = torch::randn({1, s * k, d}, opts).requires_grad_();
    auto probe = torch::randn({1, h * w, 4}, opts);
    auto params = testutil::named_params(*sca);
    params.emplace_back("pixels", x);
    params.emplace_back("latents", z);
    out.push_back({"sca", testutil::gradient_check(
                              [&] { return (sca->forward(x, z, dup.bits).tokens * probe).sum(); },
                              params)});
  }
  {
    scam::SatOptions so;
    so.primary_dim = d;
    so.context_dim = c;
    so.attention_dim = 4;
    so.heads = 2;
    scam::SatOperation sat(so);
    sat->to(torch::kFloat64);
    auto z = torch::randn({1, s * k, d}, opts).requires_grad_();
    auto x = torch::randn({1, h * w, c}, opts).requires_grad_();
    auto probe = torch::randn({1, s * k, d}, opts);
    auto params = testutil::named_params(*sat);
    params.emplace_back("primary", z);
    params.emplace_back("context", x);
    auto m = dup.bits.transpose(1, 2).contiguous();
    out.push_back({"sat_operation",
                   testutil::gradient_check([&] { return (sat->forward(z, x, m) * probe).sum(); },
                                            params)});
  }
  {
    scam::ScamOperationOptions so;
    so.in_channels = c;
    so.out_channels = 4;
    so.d = d;
    so.attention_dim = 4;
    so.heads = 2;
    scam::ScamOperation op(so);
    op->to(torch::kFloat64);
    {
      torch::NoGradGuard guard;
      op->noise_weight.fill_(0.3);
    }
    auto x = torch::randn({1, c, h, w}, opts).requires_grad_();
    auto z = torch::randn({1, s * k, d}, opts).requires_grad_();
    auto probe_f = torch::randn({1, 4, h, w}, opts);
    auto probe_z = torch::randn({1, s * k, d}, opts);
    auto params = testutil::named_params(*op);
    params.emplace_back("features", x);
    params.emplace_back("latents", z);
    out.push_back({"scam_operation", testutil::gradient_check(
                                         [&] {
                                           auto r = op->forward(x, z, dup, testutil::rng(seed + 5));
                                           return (r.features * probe_f).sum() +
                                                  (r.latents * probe_z).sum();
                                         },
                                         params)});
  }
  return out;
}

/// params(k=8) - params(k=4) of encoder + generator, and the expected 4 s d.
inline std::pair<int64_t, int64_t> parameter_scaling(scam::ModelConfig cfg) {
  cfg.k = 8;
  scam::ScamModel big(cfg);
  cfg.k = 4;
  scam::ScamModel small(cfg);
  return {scam::count_parameters(*big) - scam::count_parameters(*small),
          4 * cfg.num_labels * cfg.d};
}

struct Example {
  std::string name;
  double got;
  double expected;
};

inline torch::Tensor vec(std::initializer_list<double> v) {
  return torch::tensor(std::vector<double>(v), torch::kFloat64);
}

/// Every closed-form loss example; exact equality expected.
inline std::vector<Example> loss_examples() {
  std::vector<Example> ex;
  auto item = [](const torch::Tensor& t) { return t.item<double>(); };
  ex.push_back({"hinge_d margins satisfied", item(scam::hinge_d(vec({2}), vec({-2}))), 0});
  ex.push_back({"hinge_d zero scores", item(scam::hinge_d(vec({0}), vec({0}))), 2});
  ex.push_back({"hinge_d 0.5/-0.25", item(scam::hinge_d(vec({0.5}), vec({-0.25}))), 1.25});
  ex.push_back({"hinge_d beyond margins", item(scam::hinge_d(vec({1, 3, 1.5}), vec({-1, -4}))), 0});
  ex.push_back({"hinge_g [1,1]", item(scam::hinge_g(vec({1, 1}))), -1});
  ex.push_back({"hinge_g [0]", item(scam::hinge_g(vec({0}))), 0});
  {
    auto f = vec({0.3, -2, 5, 1}).requires_grad_();
    scam::hinge_g(f).backward();
    double worst = 0;
    for (auto g : oracle::to_vector(f.grad())) worst = std::max(worst, std::abs(g + 0.25));
    ex.push_back({"hinge_g gradient -1/batch", worst, 0});
  }
  scam::IdentityExtractor ident;
  auto x = torch::rand({2, 3, 4, 4}, testutil::rng(1), torch::kFloat64);
  ex.push_back({"perceptual identity", item(scam::perceptual_loss(x, x, ident)), 0});
  ex.push_back({"perceptual constant 0 vs 1",
                item(scam::perceptual_loss(torch::zeros({1, 3, 4, 4}), torch::ones({1, 3, 4, 4}),
                                           ident)),
                1});
  ex.push_back({"l1 identity", item(scam::l1_loss(x, x)), 0});
  ex.push_back({"l1 constants 0 vs 0.5",
                item(scam::l1_loss(torch::zeros({1, 3, 2, 2}), torch::full({1, 3, 2, 2}, 0.5))),
                0.5});
  scam::LossWeights defaults;
  ex.push_back({"total (1, 0.1, 0.2)",
                item(scam::total_generator_loss(vec({1}).squeeze(), vec({0.1}).squeeze(),
                                                vec({0.2}).squeeze(), defaults)),
                1 + 10 * 0.1 + 10 * 0.2});
  scam::LossWeights zero{0, 0, 1};
  ex.push_back({"total zero weights",
                item(scam::total_generator_loss(vec({0.7}).squeeze(), vec({0.1}).squeeze(),
                                                vec({0.2}).squeeze(), zero)),
                0.7});
  scam::LossWeights no_perc{0, 10, 1};
  ex.push_back({"total without perceptual",
                item(scam::total_generator_loss(vec({1}).squeeze(), vec({0.1}).squeeze(),
                                                vec({0.2}).squeeze(), no_perc)),
                1 + 10 * 0.2});
  return ex;
}

struct MetricChecks {
  double self_distance = 0;
  double monte_carlo = 0;  // 1-D N(0,1) vs N(1,1), N = 10^4; closed form 1
  double reid_acc_subject = 0;     // expected 1
  double reid_acc_background = 0;  // expected 0
  double reid_acc_tie = 0;         // expected 0.5 (ties are misses)
};

inline MetricChecks metric_checks(uint64_t seed) {
  MetricChecks r;
  auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  auto a = torch::randn({500, 6}, testutil::rng(seed), opts);
  r.self_distance = scam::frechet_distance({a, "a"}, {a.clone(), "b"});

  auto s0 = torch::randn({10000, 1}, testutil::rng(seed + 1), opts);
  auto s1 = torch::randn({10000, 1}, testutil::rng(seed + 2), opts) + 1;
  r.monte_carlo = scam::frechet_distance({s0, "a"}, {s1, "b"});

  auto subject = torch::tensor({{1.0, 0.0}, {0.0, 1.0}}, opts);
  auto background = torch::tensor({{0.0, 1.0}, {1.0, 0.0}}, opts);
  r.reid_acc_subject = scam::reid_acc(subject, background, subject);
  r.reid_acc_background = scam::reid_acc(subject, background, background);
  // Row 0 is equidistant from both sources, row 1 matches the subject.
  auto tie_transfer = torch::tensor({{1.0, 1.0}, {0.0, 1.0}}, opts);
  r.reid_acc_tie = scam::reid_acc(subject, background, tie_transfer);
  return r;
}

struct DeterminismResult {
  int64_t steps = 0;
  bool curves_identical = false;
  bool resume_bit_exact = false;
  std::string first_mismatch;
};

inline bool same_blobs(const scam::CheckpointFile& a, const scam::CheckpointFile& b,
                       std::string& mismatch) {
  if (a.blobs.size() != b.blobs.size()) {
    mismatch = "blob count";
    return false;
  }
  for (size_t i = 0; i < a.blobs.size(); ++i) {
    if (a.blobs[i].first != b.blobs[i].first || !torch::equal(a.blobs[i].second, b.blobs[i].second)) {
      mismatch = a.blobs[i].first;
      return false;
    }
  }
  return true;
}

/// Two fixed-seed runs of `steps` steps must log identical losses; a run
/// resumed from a checkpoint at `resume_at` and advanced one step must equal
/// the uninterrupted run bit for bit (weights, moments, RNG state).
inline DeterminismResult determinism_and_resume(int64_t steps, int64_t resume_at,
                                                const std::string& dir) {
  DeterminismResult r;
  r.steps = steps;
  auto data = testutil::tiny_dataset(16);
  auto cfg = testutil::tiny_run(42);
  cfg.train.steps = steps;
  scam::Trainer a(cfg), b(cfg);
  a.fit(data);
  b.fit(data);
  r.curves_identical = a.history().size() == static_cast<size_t>(steps);
  for (size_t i = 0; r.curves_identical && i < a.history().size(); ++i) {
    const auto& x = a.history()[i];
    const auto& y = b.history()[i];
    r.curves_identical = x.d_loss == y.d_loss && x.g_gan == y.g_gan &&
                         x.perceptual == y.perceptual && x.l1 == y.l1 && x.g_total == y.g_total;
    if (!r.curves_identical) r.first_mismatch = "loss at step " + std::to_string(x.step);
  }

  cfg.train.steps = resume_at + 1;
  scam::Trainer straight(cfg);
  for (int64_t i = 0; i < resume_at; ++i) straight.train_step(straight.sample_batch(data));
  const std::string path = dir + "/resume.ckpt";
  straight.save(path);
  straight.train_step(straight.sample_batch(data));

  auto resumed = scam::Trainer::from_checkpoint(path);
  resumed->train_step(resumed->sample_batch(data));
  r.resume_bit_exact = resumed->step() == straight.step() &&
                       same_blobs(straight.state(), resumed->state(), r.first_mismatch);
  return r;
}

}  // namespace checks
