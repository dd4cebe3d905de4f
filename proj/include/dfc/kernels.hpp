// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Untraced numeric kernels. Every reduction accumulates in double and writes
// float results, in a fixed loop order, so results are reproducible run to run.

#pragma once

#include <cstddef>
#include <cstdint>

#include "dfc/tensor.hpp"

namespace dfc::kernels {

struct Conv2dAttrs {
  int stride_h = 1;
  int stride_w = 1;
  int pad_h = 0;
  int pad_w = 0;

  friend bool operator==(const Conv2dAttrs&, const Conv2dAttrs&) = default;
};

/// Output spatial extent; throws when the kernel does not fit.
std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, int stride, int pad);

/// C[MxN] = A[MxK] * B[KxN]. A is addressed as A[i*a_rs + k*a_cs] so a
/// transposed operand needs no copy; B and C are dense row-major.
void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const float* a, std::ptrdiff_t a_rs,
          std::ptrdiff_t a_cs, const float* b, float* c);

/// Row-major transpose of a rows x cols matrix.
Tensor transpose2d(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);

/// x: [N, C, H, W], w: [O, C, KH, KW] -> [N, O, HO, WO]; no bias.
Tensor conv2d(const Tensor& x, const Tensor& w, const Conv2dAttrs& attrs);
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& w, const Shape& x_shape,
                         const Conv2dAttrs& attrs);
Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& x, const Shape& w_shape,
                          const Conv2dAttrs& attrs);

/// Direct 6-loop convolution. Slow; reference for tests and tiny shapes.
Tensor conv2d_reference(const Tensor& x, const Tensor& w, const Conv2dAttrs& attrs);

/// Non-overlapping k x k average pooling; H and W must be divisible by k.
Tensor mean_pool(const Tensor& x, int k);
Tensor mean_pool_grad(const Tensor& grad_out, const Shape& x_shape, int k);

}  // namespace dfc::kernels
