#include <gtest/gtest.h>

#include "checks.hpp"
#include "scam/encoder.hpp"
#include "scam/errors.hpp"
#include "scam/layers.hpp"
#include "scam/sat.hpp"

using namespace scam;

namespace {

auto f64() { return torch::TensorOptions().dtype(torch::kFloat64); }

SatOperation make_sat(ResidualMode mode = ResidualMode::block_input) {
  SatOptions o;
  o.primary_dim = 6;
  o.context_dim = 4;
  o.attention_dim = 4;
  o.heads = 2;
  o.residual = mode;
  SatOperation sat(o);
  sat->to(torch::kFloat64);
  return sat;
}

EncoderConfig small_encoder() {
  EncoderConfig c;
  c.num_blocks = 2;
  c.k = 2;
  c.num_labels = 3;
  c.d = 8;
  c.attention_dim = 8;
  c.heads = 2;
  c.conv_channels = {8, 12};
  return c;
}

}  // namespace

TEST(SatOperation, EmptyRowIsResidualRefinement) {
  for (auto mode : {ResidualMode::block_input, ResidualMode::intermediate}) {
    auto sat = make_sat(mode);
    auto z = torch::randn({1, 3, 6}, f64());
    auto x = torch::randn({1, 5, 4}, f64());
    auto mask = torch::ones({3, 5}, f64());
    mask[1].zero_();
    auto out = sat->forward(z, x, mask)[0][1];
    auto a = sat->norm1(z[0][1]);
    auto f = sat->ffn_out(torch::gelu(sat->ffn_in(a)));
    auto expect = sat->norm2(f + (mode == ResidualMode::block_input ? z[0][1] : a));
    EXPECT_TRUE(torch::allclose(out, expect, 0, 1e-10));
  }
}

TEST(SatOperation, ZeroWeightsStayFiniteAndShaped) {
  auto sat = make_sat();
  {
    torch::NoGradGuard guard;
    for (auto& p : sat->sca->parameters()) p.zero_();
    for (auto& p : sat->ffn_in->parameters()) p.zero_();
    for (auto& p : sat->ffn_out->parameters()) p.zero_();
  }
  auto z = torch::randn({2, 3, 6}, f64());
  auto out = sat->forward(z, torch::randn({2, 5, 4}, f64()), torch::ones({3, 5}, f64()));
  EXPECT_EQ(out.sizes(), z.sizes());
  EXPECT_TRUE(torch::isfinite(out).all().item<bool>());
  EXPECT_TRUE(torch::allclose(out, sat->norm2(z), 0, 1e-10));
}

TEST(SatOperation, CapturedMatchesPlainForward) {
  auto sat = make_sat();
  auto z = torch::randn({1, 3, 6}, f64());
  auto x = torch::randn({1, 5, 4}, f64());
  auto mask = torch::randint(2, {3, 5}, testutil::rng(2), f64());
  auto [out, record] = sat->forward_captured(z, x, mask);
  EXPECT_TRUE(torch::equal(out, sat->forward(z, x, mask)));
  EXPECT_EQ(record.weights.sizes(), (std::vector<int64_t>{1, 2, 3, 5}));
}

TEST(SatBlock, NoConvPassesFeaturesThrough) {
  auto cfg = small_encoder();
  cfg.use_conv = false;
  SatBlock block(cfg, 0);
  auto features = torch::randn({1, 8, 4, 4});
  LatentSet z{torch::randn({1, 6, 8}), 2, 3};
  auto [next, latents] = block->forward(features, z, testutil::random_mask(1, 4, 4, 3, 0));
  EXPECT_TRUE(torch::equal(next, features));
  EXPECT_EQ(latents.values.sizes(), z.values.sizes());
}

TEST(SatBlock, StridedConvHalvesResolution) {
  auto cfg = small_encoder();
  SatBlock block(cfg, 0);
  auto features = torch::randn({1, 8, 32, 32});
  LatentSet z{torch::randn({1, 6, 8}), 2, 3};
  auto [next, latents] = block->forward(features, z, testutil::random_mask(1, 32, 32, 3, 0));
  EXPECT_EQ(next.sizes(), (std::vector<int64_t>{1, 12, 16, 16}));
}

TEST(SatEncoder, IdenticalImagesGiveIdenticalLatents) {
  SatEncoder enc(small_encoder());
  auto img = torch::rand({1, 3, 8, 8}) * 2 - 1;
  auto mask = testutil::random_mask(1, 8, 8, 3, 1);
  auto z = enc->forward(torch::cat({img, img}), SemanticMask{mask.labels.repeat({2, 1, 1}), 3});
  EXPECT_EQ(z.values.sizes(), (std::vector<int64_t>{2, 6, 8}));
  EXPECT_TRUE(torch::equal(z.values[0], z.values[1]));
}

TEST(SatEncoder, SingleBlockEqualsOneBlockApplication) {
  auto cfg = small_encoder();
  cfg.num_blocks = 1;
  cfg.conv_channels = {8};
  SatEncoder enc(cfg);
  auto img = torch::rand({1, 3, 8, 8}) * 2 - 1;
  auto mask = testutil::random_mask(1, 8, 8, 3, 1);
  LatentSet q{enc->queries.unsqueeze(0), cfg.k, cfg.num_labels};
  auto expect = enc->blocks[0]->as<SatBlockImpl>()->forward(enc->stem(img), q, mask).second;
  EXPECT_TRUE(torch::equal(enc->forward(img, mask).values, expect.values));
}

TEST(SatEncoder, RegionIsolationWithoutConvolutions) {
  EXPECT_LT(checks::region_isolation_max_change(5, 3), 1e-6);
}

TEST(SatEncoder, ConvolutionsBreakIsolation) {
  // Sanity check that the isolation property is not vacuous.
  auto cfg = small_encoder();
  cfg.conv_channels = {8, 8};
  SatEncoder enc(cfg);
  auto mask = testutil::random_mask(1, 8, 8, 3, 8);
  auto img = torch::rand({1, 3, 8, 8}) * 2 - 1;
  auto bumped = img + mask.labels.eq(0).unsqueeze(1).to(torch::kFloat32);
  torch::NoGradGuard guard;
  auto diff = (enc->forward(img, mask).label_rows(1) - enc->forward(bumped, mask).label_rows(1));
  EXPECT_GT(diff.abs().max().item<double>(), 1e-6);
}

TEST(SatEncoder, RejectsMismatchedInputs) {
  SatEncoder enc(small_encoder());
  EXPECT_THROW(enc->forward(torch::zeros({1, 3, 8, 8}), testutil::random_mask(1, 4, 4, 3, 0)),
               ShapeError);
  EXPECT_THROW(enc->forward(torch::zeros({1, 3, 8, 8}), testutil::random_mask(1, 8, 8, 2, 0)),
               ShapeError);
  auto bad = small_encoder();
  bad.conv_channels = {8};
  EXPECT_THROW(SatEncoder{bad}, ConfigError);
}

TEST(ParameterLaw, OnlyQueriesDependOnK) {
  auto [diff, expect] = checks::parameter_scaling(testutil::tiny_model());
  EXPECT_EQ(diff, expect);
}
