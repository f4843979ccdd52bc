#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"
#include "scam/errors.hpp"
#include "scam/masks.hpp"

using namespace scam;

TEST(SemanticMask, PromotesTwoDimensionalLabels) {
  auto m = SemanticMask::from_labels(torch::zeros({4, 5}, torch::kInt64), 3);
  EXPECT_EQ(m.batch(), 1);
  EXPECT_EQ(m.height(), 4);
  EXPECT_EQ(m.width(), 5);
  EXPECT_EQ(m.pixels(), 20);
}

TEST(SemanticMask, RejectsOutOfRangeLabels) {
  auto labels = torch::zeros({1, 2, 2}, torch::kInt64);
  labels[0][1][1] = 3;
  EXPECT_THROW(SemanticMask::from_labels(labels, 3), DataError);
  labels[0][1][1] = -1;
  EXPECT_THROW(SemanticMask::from_labels(labels, 3), DataError);
}

TEST(DuplicateMask, MatchesOracleColumnLayout) {
  auto mask = testutil::random_mask(2, 3, 4, 3, 7);
  auto dup = duplicate_mask(mask, 2, torch::kFloat64);
  ASSERT_EQ(dup.bits.sizes(), (std::vector<int64_t>{2, 12, 6}));
  for (int64_t b = 0; b < 2; ++b) {
    auto labels = oracle::to_vector(mask.labels[b].flatten());
    std::vector<int64_t> li(labels.begin(), labels.end());
    auto expect = oracle::duplicated_mask(li, 3, 2);
    auto got = oracle::to_matrix(dup.bits[b]);
    EXPECT_EQ(got, expect);
  }
}

TEST(DuplicateMask, SingleLatentEqualsOneHot) {
  auto mask = testutil::random_mask(1, 4, 4, 3, 1);
  auto dup = duplicate_mask(mask, 1, torch::kFloat64);
  auto expect = one_hot(mask, torch::kFloat64).flatten(2).transpose(1, 2);
  EXPECT_TRUE(torch::equal(dup.bits, expect));
}

TEST(DuplicateMask, EveryRowHasExactlyKOnes) {
  auto mask = testutil::random_mask(3, 5, 5, 4, 2);
  auto dup = duplicate_mask(mask, 3);
  EXPECT_TRUE(torch::all(dup.bits.sum(-1).eq(3)).item<bool>());
}

TEST(LatentGroupMask, IsBlockDiagonal) {
  auto g = build_latent_group_mask(3, 2, torch::kFloat64);
  ASSERT_EQ(g.m(), 6);
  for (int64_t i = 0; i < 6; ++i) {
    for (int64_t j = 0; j < 6; ++j) {
      EXPECT_EQ(g.bits[i][j].item<double>(), (i / 2 == j / 2) ? 1.0 : 0.0) << i << "," << j;
    }
  }
}

TEST(DownsampleMask, NearestNeighbourIndices) {
  auto labels = torch::arange(16, torch::kInt64).view({1, 4, 4});
  auto small = downsample_mask(SemanticMask{labels, 16}, 2, 2);
  EXPECT_EQ(small.labels[0][0][0].item<int64_t>(), 0);
  EXPECT_EQ(small.labels[0][0][1].item<int64_t>(), 2);
  EXPECT_EQ(small.labels[0][1][0].item<int64_t>(), 8);
  EXPECT_EQ(small.labels[0][1][1].item<int64_t>(), 10);
}

TEST(DownsampleMask, RejectsUpsampling) {
  auto mask = testutil::random_mask(1, 4, 4, 2, 0);
  EXPECT_THROW(downsample_mask(mask, 8, 8), ShapeError);
  EXPECT_THROW(downsample_mask(mask, 0, 2), ShapeError);
}

TEST(OneHot, PlanesSumToOne) {
  auto mask = testutil::random_mask(2, 3, 3, 4, 5);
  auto oh = one_hot(mask);
  ASSERT_EQ(oh.sizes(), (std::vector<int64_t>{2, 4, 3, 3}));
  EXPECT_TRUE(torch::all(oh.sum(1).eq(1)).item<bool>());
}

TEST(PositionalEncoding, MatchesOracleFormula) {
  const int64_t h = 5, w = 7, c = 12;
  auto pe = positional_encoding_2d(h, w, c, torch::kFloat64);
  ASSERT_EQ(pe.sizes(), (std::vector<int64_t>{c, h, w}));
  auto acc = pe.accessor<double, 3>();
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        EXPECT_NEAR(acc[ch][y][x], oracle::positional_value(ch, y, x, c), 1e-12);
}

TEST(PositionalEncoding, RequiresMultipleOfFour) {
  EXPECT_THROW(positional_encoding_2d(2, 2, 6), ShapeError);
}

TEST(PixelTokens, FlattenRoundTrip) {
  auto x = torch::randn({2, 3, 4, 5}, testutil::rng(0));
  auto tokens = flatten_pixels(x);
  ASSERT_EQ(tokens.sizes(), (std::vector<int64_t>{2, 20, 3}));
  EXPECT_TRUE(torch::equal(tokens[1][7], x[1].flatten(1).select(1, 7)));
  EXPECT_TRUE(torch::equal(unflatten_pixels(tokens, 4, 5), x));
}

TEST(LatentSet, LabelRowsAreContiguousBlocks) {
  auto v = torch::arange(2 * 6 * 1, torch::kFloat32).view({2, 6, 1});
  LatentSet z{v, 2, 3};
  EXPECT_TRUE(torch::equal(z.label_rows(1), v.slice(1, 2, 4)));
  LatentSet bad{torch::zeros({1, 5, 2}), 2, 3};
  EXPECT_THROW(bad.validate(), ShapeError);
}
