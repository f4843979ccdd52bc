#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "scam/cli.hpp"
#include "scam/errors.hpp"
#include "scam/image_io.hpp"
#include "scam/viz.hpp"

using namespace scam;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kTinyConfig =
    "model.image_size = 8\nmodel.num_labels = 3\nmodel.k = 2\nmodel.d = 8\n"
    "model.attention_dim = 8\nmodel.heads = 2\nencoder.blocks = 2\nencoder.channels = 8,8\n"
    "generator.blocks = 2\ngenerator.channels = 8,8\ndiscriminator.layers = 2\n"
    "discriminator.channels = 8\ntrain.batch_size = 2\ntrain.log_every = 1\n";

}  // namespace

TEST(Cli, UnknownSubcommandIsUsageError) {
  auto r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error: usage:"), std::string::npos) << r.err;
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ErrorCategoriesMapToExitCodes) {
  testutil::TempDir dir("scam_cli_err");
  EXPECT_EQ(run({"train", "--data", dir.str("nothing")}).code, 4);
  EXPECT_EQ(run({"train", "--data", dir.str(), "--set", "model.bogus=1"}).code, 3);
  EXPECT_EQ(run({"synth-data", "--out", dir.str("s"), "--labels", "1"}).code, 3);
}

TEST(Cli, EndToEndOnSyntheticData) {
  testutil::TempDir dir("scam_cli");
  {
    std::ofstream cfg(dir.str("tiny.cfg"));
    cfg << kTinyConfig;
  }
  const auto cfg = dir.str("tiny.cfg");
  auto synth = run({"synth-data", "--out", dir.str("data"), "--config", cfg, "--train", "6",
                    "--test", "4", "--seed", "3"});
  ASSERT_EQ(synth.code, 0) << synth.err;

  auto train = run({"train", "--data", dir.str("data"), "--config", cfg, "--steps", "1", "--out",
                    dir.str("model.ckpt")});
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_TRUE(fs::exists(dir.str("model.ckpt")));
  EXPECT_NE(train.out.find("step=1"), std::string::npos) << train.out;

  const auto img = dir.str("data/test/images/000000.png");
  const auto mask = dir.str("data/test/masks/000000.png");
  const auto mask2 = dir.str("data/test/masks/000001.png");
  auto reco = run({"reconstruct", "--checkpoint", dir.str("model.ckpt"), "--image", img, "--mask",
                   mask, "--out", dir.str("reco.png"), "--no-noise"});
  ASSERT_EQ(reco.code, 0) << reco.err;
  EXPECT_EQ(read_rgb_png(dir.str("reco.png")).sizes(), (std::vector<int64_t>{8, 8, 3}));

  auto pose = run({"pose-transfer", "--checkpoint", dir.str("model.ckpt"), "--style", img,
                   "--style-mask", mask, "--pose-mask", mask2, "--out", dir.str("pose.png")});
  EXPECT_EQ(pose.code, 0) << pose.err;

  auto subj = run({"subject-transfer", "--checkpoint", dir.str("model.ckpt"), "--subject", img,
                   "--subject-mask", mask, "--background", dir.str("data/test/images/000001.png"),
                   "--background-mask", mask2, "--plan", "2=background", "--out",
                   dir.str("subj.png")});
  EXPECT_EQ(subj.code, 0) << subj.err;
  auto bad_plan = run({"subject-transfer", "--checkpoint", dir.str("model.ckpt"), "--subject", img,
                       "--subject-mask", mask, "--background", img, "--background-mask", mask,
                       "--plan", "7=subject", "--out", dir.str("x.png")});
  EXPECT_EQ(bad_plan.code, 3);

  auto viz = run({"visualize-attention", "--checkpoint", dir.str("model.ckpt"), "--image", img,
                  "--mask", mask, "--out", dir.str("attn/map.png")});
  EXPECT_EQ(viz.code, 0) << viz.err;
  EXPECT_TRUE(fs::exists(dir.str("attn/map.png")));
  auto bad_block = run({"visualize-attention", "--checkpoint", dir.str("model.ckpt"), "--image", img,
                        "--mask", mask, "--block", "9", "--out", dir.str("attn/x.png")});
  EXPECT_EQ(bad_block.code, 2);

  auto eval = run({"evaluate", "--checkpoint", dir.str("model.ckpt"), "--data", dir.str("data"),
                   "--pairs", "4", "--report", dir.str("report.txt")});
  ASSERT_EQ(eval.code, 0) << eval.err;
  std::ifstream report(dir.str("report.txt"));
  std::string text((std::istreambuf_iterator<char>(report)), {});
  for (const char* key : {"psnr=", "psnr_baseline=", "r_fid=", "s_fid=", "reid_sim=", "reid_acc="}) {
    EXPECT_NE(text.find(key), std::string::npos) << key;
  }

  auto resumed = run({"train", "--data", dir.str("data"), "--config", cfg, "--steps", "2",
                      "--resume", dir.str("model.ckpt"), "--out", dir.str("model2.ckpt")});
  EXPECT_EQ(resumed.code, 0) << resumed.err;
  EXPECT_EQ(resumed.out.find("step=1 "), std::string::npos) << resumed.out;
  EXPECT_NE(resumed.out.find("step=2"), std::string::npos) << resumed.out;
}

TEST(Cli, EvaluateIdenticalDirectories) {
  testutil::TempDir dir("scam_cli_eval");
  ASSERT_EQ(run({"synth-data", "--out", dir.str(), "--size", "8", "--train", "12", "--test", "0"}).code, 0);
  auto r = run({"evaluate", "--reference", dir.str("train"), "--candidate", dir.str("train"),
                "--embedder", "identity"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("psnr=99\n"), std::string::npos) << r.out;
  const auto at = r.out.find("r_fid=");
  ASSERT_NE(at, std::string::npos) << r.out;
  EXPECT_LT(std::stod(r.out.substr(at + 6)), 1e-6) << r.out;
}

TEST(Viz, ArgmaxTieGoesToLowestIndex) {
  AttentionRecord rec{torch::zeros({1, 2, 4, 3})};
  rec.weights.index_put_({0, torch::indexing::Slice(), 1}, torch::tensor({0.5, 0.5, 0.0}));
  rec.weights.index_put_({0, torch::indexing::Slice(), 2}, torch::tensor({0.0, 0.5, 0.5}));
  rec.weights.index_put_({0, 0, 3}, torch::tensor({0.2, 0.3, 0.5}));
  rec.weights.index_put_({0, 1, 3}, torch::tensor({0.2, 0.5, 0.3}));
  auto w = attention_argmax(rec, 2, 2);
  EXPECT_EQ(w[0][0][0].item<int64_t>(), 0);  // all zero: lowest index
  EXPECT_EQ(w[0][0][1].item<int64_t>(), 0);
  EXPECT_EQ(w[0][1][0].item<int64_t>(), 1);
  EXPECT_EQ(w[0][1][1].item<int64_t>(), 1);  // head mean 0.4 vs 0.4: tie
}

TEST(Viz, PaletteIsDistinctAndDeterministic) {
  auto p = latent_palette(40);
  ASSERT_GE(p.size(), 40u);
  EXPECT_EQ(p, latent_palette(40));
  for (size_t i = 0; i < 40; ++i)
    for (size_t j = i + 1; j < 40; ++j) EXPECT_NE(p[i], p[j]) << i << "," << j;
}

TEST(Viz, SingleLatentPerLabelRecoloursTheMask) {
  ScamModel model(testutil::tiny_model(1));
  auto mask = testutil::random_mask(1, 8, 8, 3, 5);
  auto map = visualize_attention(model, torch::rand({1, 3, 8, 8}) * 2 - 1, mask);
  EXPECT_TRUE(torch::equal(map.winners, mask.labels));
  EXPECT_TRUE(torch::equal(map.image, paint(mask.labels, latent_palette(3))));
}

TEST(Viz, WinnersStayInTheirLabelGroup) {
  ScamModel model(testutil::tiny_model(3));
  auto mask = testutil::random_mask(2, 8, 8, 3, 6);
  for (int64_t op = 0; op < 3; ++op) {
    auto map = visualize_attention(model, torch::rand({2, 3, 8, 8}) * 2 - 1, mask, {-1, op});
    auto labels = downsample_mask(mask, map.winners.size(1), map.winners.size(2)).labels;
    EXPECT_TRUE(torch::equal(torch::div(map.winners, 3, "floor"), labels)) << "op " << op;
  }
  EXPECT_THROW(visualize_attention(model, torch::rand({1, 3, 8, 8}), mask.slice(0, 1), {5, 0}),
               UsageError);
}
