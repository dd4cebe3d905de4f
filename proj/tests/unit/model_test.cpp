// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/model.hpp"

#include <gtest/gtest.h>

#include <random>

#include "unit/gradcheck.hpp"

namespace dfc::model {
namespace {

using testing::random_tensor;

ModelGraph toy(std::uint64_t seed = 0) {
  auto m = build_model("c8-p2-c12-c16-p2-c20", {3, 8, 8, 10});
  init_weights(m, seed);
  return m;
}

TEST(Arch, LayerSequence) {
  auto m = build_model("c4b-p2-f6", {3, 4, 4, 5});
  std::vector<LayerKind> kinds;
  for (const auto& l : m.layers) kinds.push_back(l.kind);
  EXPECT_EQ(kinds, (std::vector<LayerKind>{LayerKind::kConv, LayerKind::kBatchNorm,
                                           LayerKind::kReLU, LayerKind::kPool, LayerKind::kFlatten,
                                           LayerKind::kLinear, LayerKind::kReLU,
                                           LayerKind::kLinear}));
  EXPECT_EQ(m.layers[5].c_in, 16);
  EXPECT_EQ(m.layers.back().c_out, 5);
  EXPECT_TRUE(m.layers.back().has_bias);
}

TEST(Arch, RejectsMalformed) {
  const InputSpec in{3, 8, 8, 10};
  EXPECT_THROW(build_model("c8--c8", in), std::invalid_argument);
  EXPECT_THROW(build_model("x8", in), std::invalid_argument);
  EXPECT_THROW(build_model("c0", in), std::invalid_argument);
  EXPECT_THROW(build_model("p3", in), std::invalid_argument);
  EXPECT_THROW(build_model("f8-c8", in), std::invalid_argument);
}

TEST(Forward, LogitShape) {
  auto m = toy();
  std::mt19937 rng(0);
  auto y = forward(m, random_tensor({5, 3, 8, 8}, rng));
  EXPECT_EQ(y.shape(), (Shape{5, 10}));
}

TEST(Forward, InputShapeMismatchThrows) {
  auto m = toy();
  EXPECT_THROW(forward(m, Tensor({2, 4, 8, 8})), std::invalid_argument);
}

/// Appends flatten and an identity classifier so a feature extractor can be
/// inspected through the logits.
void append_identity_head(ModelGraph& m, std::int64_t features) {
  Layer f;
  f.kind = LayerKind::kFlatten;
  m.layers.push_back(f);
  Layer l;
  l.kind = LayerKind::kLinear;
  l.c_in = l.c_out = features;
  l.w = Tensor({features, features});
  for (std::int64_t i = 0; i < features; ++i) l.w[i * features + i] = 1.0f;
  l.has_bias = true;
  l.bias = Tensor({features});
  m.layers.push_back(l);
  m.input.classes = features;
  m.infer_shapes();
}

TEST(Forward, IdentityOneByOneConv) {
  ModelGraph m;
  m.input = {2, 3, 3, 2};
  Layer c;
  c.kind = LayerKind::kConv;
  c.c_in = c.c_out = 2;
  c.w = Tensor({2, 2, 1, 1}, std::vector<float>{1, 0, 0, 1});
  m.layers.push_back(c);
  append_identity_head(m, 18);
  std::mt19937 rng(1);
  auto x = random_tensor({2, 2, 3, 3}, rng);
  EXPECT_TRUE(bit_identical(forward(m, x), x.reshaped({2, 18})));
}

TEST(Forward, OverrideWithOriginalWeightsIsIdentical) {
  auto m = toy(3);
  std::mt19937 rng(2);
  auto x = random_tensor({4, 3, 8, 8}, rng);
  std::map<std::size_t, Tensor> ov;
  for (std::size_t i = 0; i < m.layers.size(); ++i)
    if (m.layers[i].is_weighted()) ov.emplace(i, m.layers[i].w);
  EXPECT_TRUE(bit_identical(forward(m, x, ov), forward(m, x)));
}

TEST(Forward, OverrideShapeMismatchNamesLayer) {
  auto m = toy();
  std::map<std::size_t, Tensor> ov{{3, Tensor({12, 8, 1, 1})}};
  try {
    forward(m, Tensor({1, 3, 8, 8}), ov);
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("layer 3"), std::string::npos) << e.what();
  }
}

TEST(Forward, TwoLayerMlpMatchesHandComputation) {
  auto m = build_model("f2", {1, 1, 3, 2});
  // layers: flatten, linear 3->2, relu, linear 2->2 (+bias)
  m.layers[1].w = Tensor({2, 3}, std::vector<float>{1, -1, 2, 0.5f, 0.25f, -1});
  m.layers[3].w = Tensor({2, 2}, std::vector<float>{1, 2, -3, 1});
  m.layers[3].bias = Tensor({2}, std::vector<float>{0.5f, -0.5f});
  Tensor x({1, 1, 1, 3}, std::vector<float>{1, 2, 3});
  // h = relu([1 - 2 + 6, 0.5 + 0.5 - 3]) = [5, 0]
  // y = [5 + 0 + 0.5, -15 + 0 - 0.5]
  auto y = forward(m, x);
  EXPECT_NEAR(y[0], 5.5f, 1e-6);
  EXPECT_NEAR(y[1], -15.5f, 1e-6);
}

TEST(Forward, BatchNormUsesStoredStatistics) {
  auto m = build_model("c2b", {1, 2, 2, 8});
  m.layers[0].w = Tensor({2, 1, 3, 3});
  m.layers[0].w[4] = 1.0f;  // centre tap of filter 0 copies the input
  m.layers[0].w[13] = 1.0f;
  auto& bn = m.layers[1];
  bn.running_mean = Tensor({2}, std::vector<float>{1.0f, 0.0f});
  bn.running_var = Tensor({2}, std::vector<float>{4.0f, 1.0f});
  bn.gamma = Tensor({2}, std::vector<float>{2.0f, 1.0f});
  bn.beta = Tensor({2}, std::vector<float>{0.5f, 0.0f});
  bn.eps = 0.0f;
  ModelGraph body = m;
  body.layers.resize(3);
  append_identity_head(body, 8);
  Tensor x({1, 1, 2, 2}, std::vector<float>{3, 5, 1, -1});
  auto y = forward(body, x);
  // channel 0: relu(2 (x - 1) / 2 + 0.5); channel 1: relu(x)
  EXPECT_NEAR(y[0], 2.5f, 1e-6);
  EXPECT_NEAR(y[1], 4.5f, 1e-6);
  EXPECT_NEAR(y[3], 0.0f, 1e-6);
  EXPECT_NEAR(y[4], 3.0f, 1e-6);
  EXPECT_NEAR(y[7], 0.0f, 1e-6);
}

TEST(Forward, Deterministic) {
  auto m = toy(5);
  std::mt19937 rng(7);
  auto x = random_tensor({8, 3, 8, 8}, rng);
  EXPECT_TRUE(bit_identical(forward(m, x), forward(m, x)));
  auto m2 = toy(5);
  EXPECT_TRUE(bit_identical(forward(m2, x), forward(m, x)));
}

TEST(Units, GeometryOfToy) {
  auto m = toy();
  auto u = m.units();
  ASSERT_EQ(u.size(), 5u);
  EXPECT_EQ(u[0].c_in, 3);
  EXPECT_EQ(u[0].out_area, 64);
  EXPECT_EQ(u[1].out_area, 16);
  EXPECT_EQ(u[3].out_area, 4);
  // Classifier over a 20 x 2 x 2 feature map.
  EXPECT_EQ(u[4].c_in, 20);
  EXPECT_EQ(u[4].kernel_area, 4);
  EXPECT_EQ(u[4].out_area, 1);
  EXPECT_FALSE(u[4].prunable);
  EXPECT_TRUE(u[3].prunable);
}

std::vector<std::vector<bool>> full_masks(const ModelGraph& m) {
  std::vector<std::vector<bool>> out;
  for (const auto& u : m.units()) out.emplace_back(u.c_out, true);
  return out;
}

TEST(HardFlops, DenseMatchesClosedForm) {
  auto m = toy();
  const std::int64_t expected = 64 * 9 * 3 * 8 + 16 * 9 * 8 * 12 + 16 * 9 * 12 * 16 +
                                4 * 9 * 16 * 20 + 80 * 10;
  auto r = hard_flops(m, full_masks(m), std::vector<std::optional<std::int64_t>>(5));
  EXPECT_EQ(r.flops, expected);
  EXPECT_EQ(r.dense_flops, expected);
  EXPECT_DOUBLE_EQ(r.ratio(), 1.0);
  EXPECT_EQ(count_flops(m), expected);
}

TEST(HardFlops, AllZeroMasks) {
  auto m = toy();
  std::vector<std::vector<bool>> masks;
  for (const auto& u : m.units()) masks.emplace_back(u.c_out, false);
  auto r = hard_flops(m, masks, std::vector<std::optional<std::int64_t>>(5));
  EXPECT_EQ(r.flops, 0);
}

TEST(HardFlops, FullRankFactorizationCostsMore) {
  auto m = build_model("c16", {16, 4, 4, 2});
  std::vector<std::vector<bool>> masks{std::vector<bool>(16, true), std::vector<bool>(2, true)};
  auto dense = hard_flops(m, masks, {std::nullopt, std::nullopt});
  auto fact = hard_flops(m, masks, {16, std::nullopt});
  const std::int64_t area = 16;
  EXPECT_EQ(fact.flops - dense.flops, area * (16 * (9 * 16 + 16) - 9 * 16 * 16));
  EXPECT_NEAR(static_cast<double>(16 * (9 * 16 + 16)) / (9 * 16 * 16), 2560.0 / 2304.0, 1e-12);
}

TEST(HardFlops, RankBoundAndLengthErrors) {
  auto m = toy();
  auto masks = full_masks(m);
  std::vector<std::optional<std::int64_t>> ranks(5);
  ranks[0] = 9;  // c_out = 8
  EXPECT_THROW(hard_flops(m, masks, ranks), std::invalid_argument);
  ranks[0] = -1;
  EXPECT_THROW(hard_flops(m, masks, ranks), std::invalid_argument);
  masks[1].pop_back();
  EXPECT_THROW(hard_flops(m, masks, std::vector<std::optional<std::int64_t>>(5)),
               std::invalid_argument);
}

TEST(HardFlops, Monotone) {
  auto m = toy();
  std::mt19937 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto masks = full_masks(m);
    std::vector<std::optional<std::int64_t>> ranks(5);
    for (std::size_t u = 0; u + 1 < masks.size(); ++u)
      for (std::size_t j = 0; j < masks[u].size(); ++j) masks[u][j] = rng() % 3 != 0;
    const auto base = hard_flops(m, masks, ranks).flops;
    // Dropping one more kept filter never increases the count.
    const auto u = rng() % 4;
    for (std::size_t j = 0; j < masks[u].size(); ++j) {
      if (masks[u][j]) {
        masks[u][j] = false;
        break;
      }
    }
    EXPECT_LE(hard_flops(m, masks, ranks).flops, base);
    // Lowering a rank never increases the count.
    ranks[2] = 3;
    const auto r3 = hard_flops(m, masks, ranks).flops;
    ranks[2] = 2;
    EXPECT_LE(hard_flops(m, masks, ranks).flops, r3);
  }
}

TEST(ParamCount, ConvAndFactorizedPair) {
  ModelGraph m;
  m.input = {3, 4, 4, 4};
  Layer c;
  c.kind = LayerKind::kConv;
  c.c_in = 3;
  c.c_out = 4;
  c.kh = c.kw = 3;
  c.attrs = {1, 1, 1, 1};
  c.w = Tensor({4, 3, 3, 3});
  m.layers.push_back(c);
  // The identity head adds 64 * 64 weights and 64 biases.
  append_identity_head(m, 64);
  const std::int64_t head = 64 * 64 + 64;
  EXPECT_EQ(param_count(m) - head, 108);

  Layer f = c;
  f.w = Tensor();
  f.factorized = true;
  f.rank = 2;
  f.w1 = Tensor({2, 3, 3, 3});
  f.w2 = Tensor({4, 2, 1, 1});
  m.layers[0] = f;
  m.infer_shapes();
  EXPECT_EQ(param_count(m) - head, 62);
}

TEST(ParamCount, ToyMatchesPerLayerSum) {
  auto m = toy();
  const std::int64_t expected = 8 * 3 * 9 + 12 * 8 * 9 + 16 * 12 * 9 + 20 * 16 * 9 + 10 * 80 + 10;
  EXPECT_EQ(param_count(m), expected);
}

TEST(Bind, GradientFlowsOnlyWhenTrainable) {
  auto m = toy();
  std::mt19937 rng(8);
  auto x = random_tensor({2, 3, 8, 8}, rng);
  for (bool trainable : {false, true}) {
    ad::Tape tape;
    auto bound = bind(tape, m, trainable);
    auto y = forward(m, bound, tape.constant(x));
    auto g = tape.backward(ad::sum(y));
    EXPECT_EQ(g.has(bound[0].w), trainable);
  }
  EXPECT_EQ(parameter_tensors(m).size(), 6u);
}

TEST(InitWeights, DeterministicInSeed) {
  auto a = toy(1), b = toy(1), c = toy(2);
  EXPECT_TRUE(bit_identical(a.layers[0].w, b.layers[0].w));
  EXPECT_FALSE(bit_identical(a.layers[0].w, c.layers[0].w));
}

}  // namespace
}  // namespace dfc::model
