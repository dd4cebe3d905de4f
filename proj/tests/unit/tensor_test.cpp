// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/tensor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

namespace dfc {
namespace {

TEST(Shape, NumelAndString) {
  EXPECT_EQ(shape_numel({}), 1);
  EXPECT_EQ(shape_numel({2, 3, 4}), 24);
  EXPECT_EQ(shape_str({2, 3}), "[2x3]");
}

TEST(Tensor, FillConstructor) {
  Tensor t({2, 3}, 1.5f);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.dim(1), 3);
  for (float v : t.data()) EXPECT_EQ(v, 1.5f);
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor({2, 0}), std::invalid_argument);
  EXPECT_THROW(Tensor({-1}), std::invalid_argument);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), std::invalid_argument);
}

TEST(Tensor, ScalarAndItem) {
  auto s = Tensor::scalar(3.0f);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.item(), 3.0f);
  EXPECT_THROW(Tensor({2}).item(), std::invalid_argument);
}

TEST(Tensor, CheckedRejectsNonFinite) {
  EXPECT_NO_THROW(Tensor::checked({2}, {1.0f, 2.0f}));
  EXPECT_THROW(Tensor::checked({2}, {1.0f, std::numeric_limits<float>::quiet_NaN()}),
               std::invalid_argument);
  EXPECT_THROW(Tensor::checked({1}, {std::numeric_limits<float>::infinity()}),
               std::invalid_argument);
}

TEST(Tensor, ReshapeKeepsData) {
  Tensor t({2, 3}, std::vector<float>{0, 1, 2, 3, 4, 5});
  auto r = t.reshaped({3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_EQ(r.storage(), t.storage());
  EXPECT_THROW(t.reshaped({4, 2}), std::invalid_argument);
}

TEST(Tensor, MaxAbsDiffAndBitIdentity) {
  Tensor a({3}, std::vector<float>{1, 2, 3});
  Tensor b({3}, std::vector<float>{1, 2.5f, 3});
  EXPECT_DOUBLE_EQ(max_abs_diff(a, b), 0.5);
  EXPECT_THROW(max_abs_diff(a, Tensor({2})), std::invalid_argument);

  Tensor z({1}, std::vector<float>{0.0f});
  Tensor nz({1}, std::vector<float>{-0.0f});
  EXPECT_TRUE(z == nz);
  EXPECT_FALSE(bit_identical(z, nz));
  EXPECT_TRUE(bit_identical(a, a));
}

TEST(Tensor, AllFinite) {
  Tensor t({2}, 0.0f);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<float>::infinity();
  EXPECT_FALSE(t.all_finite());
}

}  // namespace
}  // namespace dfc
