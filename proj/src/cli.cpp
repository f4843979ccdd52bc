#include "scam/cli.hpp"

#include <ATen/CPUGeneratorImpl.h>
#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "scam/data.hpp"
#include "scam/errors.hpp"
#include "scam/evaluate.hpp"
#include "scam/image_io.hpp"
#include "scam/metrics.hpp"
#include "scam/trainer.hpp"
#include "scam/transfer.hpp"
#include "scam/viz.hpp"

namespace scam {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::optional<uint64_t> seed;
  std::vector<std::string> configs;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream of the command");
  cmd->add_option("--config", c.configs, "Key-value configuration file (repeatable, later wins)")
      ->take_all();
  cmd->add_option("--set", c.sets, "Override one key, key=value (repeatable)")->take_all();
}

KeyValueConfig overrides(const Common& c) {
  KeyValueConfig kv;
  for (const auto& path : c.configs) {
    const auto file = KeyValueConfig::load(path);
    for (const auto& [k, v] : file.values()) kv.set(k, v);
  }
  for (const auto& s : c.sets) kv.set(s);
  return kv;
}

struct Inference {
  std::string checkpoint;
  bool no_noise = false;
  std::string remap;
  std::string out;
};

void add_inference(CLI::App* cmd, Inference& i) {
  cmd->add_option("--checkpoint", i.checkpoint, "Trainer checkpoint")->required();
  cmd->add_option("--out", i.out, "Output PNG")->required();
  cmd->add_flag("--no-noise", i.no_noise, "Disable generator noise");
  cmd->add_option("--remap", i.remap, "Two-column label remap file");
}

struct LoadedModel {
  ScamModel model{nullptr};
  std::optional<at::Generator> noise;
};

LoadedModel open_model(const Inference& inf, const Common& common) {
  LoadedModel lm;
  lm.model = load_model(read_checkpoint(inf.checkpoint), overrides(common));
  lm.model->set_noise_active(!inf.no_noise);
  if (!inf.no_noise) lm.noise = at::make_generator<at::CPUGeneratorImpl>(common.seed.value_or(0));
  return lm;
}

std::map<int64_t, int64_t> read_remap(const std::string& path) {
  if (path.empty()) return {};
  DatasetManifest m;
  m.load_remap(path);
  return m.label_remap;
}

SemanticMask read_mask(const std::string& path, int64_t num_labels,
                       const std::map<int64_t, int64_t>& remap) {
  auto labels = read_label_png(path);
  if (!remap.empty()) {
    auto* p = labels.data_ptr<int64_t>();
    for (int64_t i = 0; i < labels.numel(); ++i) {
      auto it = remap.find(p[i]);
      if (it == remap.end()) throw DataError(path + ": unmapped label " + std::to_string(p[i]));
      p[i] = it->second;
    }
  }
  return SemanticMask::from_labels(labels, num_labels);
}

torch::Tensor read_image(const std::string& path) {
  return to_signed_unit(read_rgb_png(path)).unsqueeze(0);
}

void write_image(const std::string& path, const torch::Tensor& batch) {
  if (!fs::path(path).parent_path().empty()) fs::create_directories(fs::path(path).parent_path());
  write_rgb_png(path, from_signed_unit(batch[0]));
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

std::unique_ptr<Embedder> make_embedder(const std::string& name, uint64_t seed) {
  if (name == "identity") return std::make_unique<IdentityEmbedder>();
  if (name == "random-conv") return std::make_unique<RandomConvEmbedder>(seed);
  throw UsageError("unknown embedder '" + name + "' (identity, random-conv)");
}

int run_train(const Common& common, const std::string& data, const std::string& out,
              const std::string& resume, std::optional<int64_t> steps, const std::string& log,
              const std::string& remap, std::ostream& os) {
  auto kv = overrides(common);
  if (common.seed) kv.set("train.seed", std::to_string(*common.seed));
  if (steps) kv.set("train.steps", std::to_string(*steps));
  auto config = to_run_config(kv);
  config.validate();

  auto manifest = DatasetManifest::open(data, "train", config.model.num_labels);
  if (!remap.empty()) manifest.load_remap(remap);
  auto dataset = load_dataset(manifest);
  if (dataset.images.size(2) != config.model.image_size ||
      dataset.images.size(3) != config.model.image_size) {
    throw DataError("training images are " + std::to_string(dataset.images.size(2)) + "x" +
                    std::to_string(dataset.images.size(3)) + ", model.image_size is " +
                    std::to_string(config.model.image_size));
  }

  Trainer trainer(config);
  if (!resume.empty()) trainer.load(resume);
  std::ofstream log_file;
  if (!log.empty()) {
    log_file.open(log, std::ios::app);
    if (!log_file) throw DataError("cannot write " + log);
  }
  const auto every = config.train.log_every;
  trainer.fit(dataset, out, [&](const StepMetrics& m) {
    char line[256];
    std::snprintf(line, sizeof(line), "step=%lld d_loss=%.5f g_gan=%.5f perceptual=%.5f l1=%.5f g_total=%.5f",
                  static_cast<long long>(m.step), m.d_loss, m.g_gan, m.perceptual, m.l1, m.g_total);
    if (log_file) log_file << line << '\n';
    if (every > 0 && (m.step % every == 0 || m.step == config.train.steps)) os << line << std::endl;
  });
  os << "checkpoint=" << out << " step=" << trainer.step() << '\n';
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& os, std::ostream& err) {
  CLI::App app{"Semantic cross attention encoder/generator: training, transfer and evaluation"};
  app.name("scam");
  app.require_subcommand(1);

  Common common;

  // train
  auto* train = app.add_subcommand("train", "Train encoder, generator and discriminator");
  std::string t_data, t_out = "scam.ckpt", t_resume, t_log, t_remap;
  std::optional<int64_t> t_steps;
  train->add_option("--data", t_data, "Dataset root holding train/")->required();
  train->add_option("--out", t_out, "Checkpoint path");
  train->add_option("--resume", t_resume, "Checkpoint to continue from");
  train->add_option("--steps", t_steps, "Shortcut for --set train.steps=N");
  train->add_option("--log", t_log, "Append per-step losses to this file");
  train->add_option("--remap", t_remap, "Two-column label remap file");
  add_common(train, common);

  // reconstruct
  auto* reco = app.add_subcommand("reconstruct", "Encode and regenerate one image");
  Inference r_inf;
  std::string r_image, r_mask;
  reco->add_option("--image", r_image, "Input PNG")->required();
  reco->add_option("--mask", r_mask, "Index-mask PNG")->required();
  add_inference(reco, r_inf);
  add_common(reco, common);

  // pose-transfer
  auto* pose = app.add_subcommand("pose-transfer", "Render a style image under another mask");
  Inference p_inf;
  std::string p_style, p_style_mask, p_pose_mask;
  pose->add_option("--style", p_style, "Image supplying appearance")->required();
  pose->add_option("--style-mask", p_style_mask, "Mask of the style image")->required();
  pose->add_option("--pose-mask", p_pose_mask, "Layout to generate")->required();
  add_inference(pose, p_inf);
  add_common(pose, common);

  // subject-transfer
  auto* subj = app.add_subcommand("subject-transfer", "Place a subject into another image's context");
  Inference s_inf;
  std::string s_subject, s_subject_mask, s_bg, s_bg_mask, s_pose_mask, s_plan;
  subj->add_option("--subject", s_subject, "Subject image")->required();
  subj->add_option("--subject-mask", s_subject_mask, "Subject index mask")->required();
  subj->add_option("--background", s_bg, "Background image")->required();
  subj->add_option("--background-mask", s_bg_mask, "Background index mask")->required();
  subj->add_option("--pose-mask", s_pose_mask, "Layout to generate (default: subject mask)");
  subj->add_option("--plan", s_plan, "label=subject|background,... (default: 0=background)");
  add_inference(subj, s_inf);
  add_common(subj, common);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Metric report for a checkpoint or two image directories");
  std::string e_ckpt, e_data, e_ref, e_cand, e_report, e_embedder = "random-conv", e_remap;
  int64_t e_pairs = 50;
  bool e_noise = false;
  eval->add_option("--checkpoint", e_ckpt, "Trainer checkpoint");
  eval->add_option("--data", e_data, "Dataset root with train/ and test/");
  eval->add_option("--reference", e_ref, "Reference image directory");
  eval->add_option("--candidate", e_cand, "Candidate image directory");
  eval->add_option("--pairs", e_pairs, "Subject-transfer pairs");
  eval->add_option("--embedder", e_embedder, "identity or random-conv");
  eval->add_option("--report", e_report, "Write metric=value lines here");
  eval->add_option("--remap", e_remap, "Two-column label remap file");
  eval->add_flag("--noise", e_noise, "Keep generator noise on");
  add_common(eval, common);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Write the synthetic coloured-shapes dataset");
  std::string y_out;
  SyntheticSpec y_spec;
  synth->add_option("--out", y_out, "Dataset root to create")->required();
  synth->add_option("--size", y_spec.image_size, "Image side in pixels");
  synth->add_option("--labels", y_spec.num_labels, "Semantic labels");
  synth->add_option("--train", y_spec.train_count, "Training images");
  synth->add_option("--test", y_spec.test_count, "Test images");
  synth->add_option("--shapes", y_spec.shapes_per_label, "Shapes per foreground label");
  add_common(synth, common);

  // visualize-attention
  auto* viz = app.add_subcommand("visualize-attention", "Paint pixels by their most attended latent");
  Inference v_inf;
  std::string v_image, v_mask;
  AttentionSelector v_sel;
  viz->add_option("--image", v_image, "Input PNG")->required();
  viz->add_option("--mask", v_mask, "Index-mask PNG")->required();
  viz->add_option("--block", v_sel.block, "Generator block, negative counts from the end");
  viz->add_option("--op", v_sel.op, "0, 1 main path, 2 RGB branch");
  add_inference(viz, v_inf);
  add_common(viz, common);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      os << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      os << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err << app.help();
      throw UsageError(e.what());
    }

    if (train->parsed()) {
      return run_train(common, t_data, t_out, t_resume, t_steps, t_log, t_remap, os);
    }
    if (reco->parsed()) {
      auto lm = open_model(r_inf, common);
      const auto s = lm.model->config().num_labels;
      torch::NoGradGuard no_grad;
      auto out = reconstruct(lm.model, read_image(r_image),
                             read_mask(r_mask, s, read_remap(r_inf.remap)), lm.noise);
      write_image(r_inf.out, out);
      return 0;
    }
    if (pose->parsed()) {
      auto lm = open_model(p_inf, common);
      const auto s = lm.model->config().num_labels;
      const auto remap = read_remap(p_inf.remap);
      torch::NoGradGuard no_grad;
      auto out = pose_transfer(lm.model, read_image(p_style), read_mask(p_style_mask, s, remap),
                               read_mask(p_pose_mask, s, remap), lm.noise);
      write_image(p_inf.out, out);
      return 0;
    }
    if (subj->parsed()) {
      auto lm = open_model(s_inf, common);
      const auto s = lm.model->config().num_labels;
      const auto remap = read_remap(s_inf.remap);
      SubjectTransferRequest req{read_image(s_subject), read_mask(s_subject_mask, s, remap),
                                 read_image(s_bg),      read_mask(s_bg_mask, s, remap),
                                 std::nullopt,          MixPlan::parse(s_plan, s)};
      if (!s_pose_mask.empty()) req.pose_mask = read_mask(s_pose_mask, s, remap);
      torch::NoGradGuard no_grad;
      write_image(s_inf.out, subject_transfer(lm.model, req, lm.noise));
      return 0;
    }
    if (eval->parsed()) {
      auto embedder = make_embedder(e_embedder, common.seed.value_or(11));
      MetricReport report;
      if (!e_ref.empty() || !e_cand.empty()) {
        if (e_ref.empty() || e_cand.empty()) throw UsageError("--reference needs --candidate");
        report = evaluate_directories(e_ref, e_cand, *embedder);
      } else {
        if (e_ckpt.empty() || e_data.empty()) {
          throw UsageError("evaluate needs --checkpoint and --data, or --reference and --candidate");
        }
        Inference inf;
        inf.checkpoint = e_ckpt;
        inf.no_noise = !e_noise;
        auto lm = open_model(inf, common);
        const auto s = lm.model->config().num_labels;
        auto open_split = [&](const std::string& split) {
          auto m = DatasetManifest::open(e_data, split, s);
          if (!e_remap.empty()) m.load_remap(e_remap);
          return load_dataset(m);
        };
        EvaluationOptions opts;
        opts.transfer_pairs = e_pairs;
        opts.noise = e_noise;
        opts.seed = common.seed.value_or(0);
        report = evaluate_model(lm.model, open_split("train"), open_split("test"), *embedder, opts);
      }
      os << report.table();
      if (!e_report.empty()) {
        std::ofstream f(e_report);
        if (!f) throw DataError("cannot write " + e_report);
        f << report.flat();
      } else {
        os << report.flat();
      }
      return 0;
    }
    if (synth->parsed()) {
      auto kv = overrides(common);
      if (kv.has("model.image_size") && synth->count("--size") == 0) {
        y_spec.image_size = to_run_config(kv).model.image_size;
      }
      if (kv.has("model.num_labels") && synth->count("--labels") == 0) {
        y_spec.num_labels = to_run_config(kv).model.num_labels;
      }
      y_spec.seed = common.seed.value_or(0);
      generate_synthetic(y_spec, y_out);
      os << "wrote " << y_spec.train_count << " train and " << y_spec.test_count
         << " test images to " << y_out << '\n';
      return 0;
    }
    if (viz->parsed()) {
      auto lm = open_model(v_inf, common);
      const auto s = lm.model->config().num_labels;
      auto map = visualize_attention(lm.model, read_image(v_image),
                                     read_mask(v_mask, s, read_remap(v_inf.remap)), v_sel, lm.noise);
      if (!fs::path(v_inf.out).parent_path().empty()) {
        fs::create_directories(fs::path(v_inf.out).parent_path());
      }
      write_rgb_png(v_inf.out, map.image[0]);
      return 0;
    }
    throw UsageError("no subcommand given");
  } catch (const Error& e) {
    err << "error: " << category_name(e.category()) << ": " << one_line(e.what()) << '\n';
    return exit_code(e.category());
  } catch (const c10::Error& e) {
    err << "error: data: " << one_line(e.what_without_backtrace()) << '\n';
    return exit_code(ErrorCategory::data);
  } catch (const std::exception& e) {
    err << "error: data: " << one_line(e.what()) << '\n';
    return exit_code(ErrorCategory::data);
  }
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace scam
