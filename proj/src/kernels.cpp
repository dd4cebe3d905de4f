// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/kernels.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace dfc::kernels {

namespace {

void require_rank(const Tensor& t, std::size_t r, const char* op, const char* what) {
  if (t.rank() != r) {
    throw std::invalid_argument(std::string(op) + ": " + what + " must be rank " +
                                std::to_string(r) + ", got " + shape_str(t.shape()));
  }
}

// col[k][p], k = (c*KH + kh)*KW + kw, p = (n*HO + oh)*WO + ow.
std::vector<float> im2col(const Tensor& x, std::int64_t kh, std::int64_t kw, std::int64_t ho,
                          std::int64_t wo, const Conv2dAttrs& a) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t kdim = c * kh * kw;
  const std::int64_t pdim = n * ho * wo;
  std::vector<float> col(static_cast<std::size_t>(kdim * pdim), 0.0f);
  const float* xp = x.ptr();
  for (std::int64_t ci = 0; ci < c; ++ci) {
    for (std::int64_t ki = 0; ki < kh; ++ki) {
      for (std::int64_t kj = 0; kj < kw; ++kj) {
        float* row = col.data() + ((ci * kh + ki) * kw + kj) * pdim;
        for (std::int64_t ni = 0; ni < n; ++ni) {
          const float* plane = xp + (ni * c + ci) * h * w;
          for (std::int64_t oh = 0; oh < ho; ++oh) {
            const std::int64_t ih = oh * a.stride_h - a.pad_h + ki;
            float* dst = row + (ni * ho + oh) * wo;
            if (ih < 0 || ih >= h) continue;
            for (std::int64_t ow = 0; ow < wo; ++ow) {
              const std::int64_t iw = ow * a.stride_w - a.pad_w + kj;
              if (iw >= 0 && iw < w) dst[ow] = plane[ih * w + iw];
            }
          }
        }
      }
    }
  }
  return col;
}

Tensor col2im(const std::vector<float>& col, const Shape& x_shape, std::int64_t kh,
              std::int64_t kw, std::int64_t ho, std::int64_t wo, const Conv2dAttrs& a) {
  const auto n = x_shape[0], c = x_shape[1], h = x_shape[2], w = x_shape[3];
  const std::int64_t pdim = n * ho * wo;
  // Scatter-add in double, in a fixed order, then round once.
  std::vector<double> acc(static_cast<std::size_t>(n * c * h * w), 0.0);
  for (std::int64_t ci = 0; ci < c; ++ci) {
    for (std::int64_t ki = 0; ki < kh; ++ki) {
      for (std::int64_t kj = 0; kj < kw; ++kj) {
        const float* row = col.data() + ((ci * kh + ki) * kw + kj) * pdim;
        for (std::int64_t ni = 0; ni < n; ++ni) {
          double* plane = acc.data() + (ni * c + ci) * h * w;
          for (std::int64_t oh = 0; oh < ho; ++oh) {
            const std::int64_t ih = oh * a.stride_h - a.pad_h + ki;
            if (ih < 0 || ih >= h) continue;
            const float* src = row + (ni * ho + oh) * wo;
            for (std::int64_t ow = 0; ow < wo; ++ow) {
              const std::int64_t iw = ow * a.stride_w - a.pad_w + kj;
              if (iw >= 0 && iw < w) plane[ih * w + iw] += src[ow];
            }
          }
        }
      }
    }
  }
  Tensor out(x_shape);
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

void check_conv(const Tensor& x, const Shape& w_shape, const Conv2dAttrs& a) {
  require_rank(x, 4, "conv2d", "input");
  if (w_shape.size() != 4) {
    throw std::invalid_argument("conv2d: kernel must be rank 4, got " + shape_str(w_shape));
  }
  if (x.dim(1) != w_shape[1]) {
    throw std::invalid_argument("conv2d: input " + shape_str(x.shape()) + " has " +
                                std::to_string(x.dim(1)) + " channels but kernel " +
                                shape_str(w_shape) + " expects " + std::to_string(w_shape[1]));
  }
  if (a.stride_h < 1 || a.stride_w < 1 || a.pad_h < 0 || a.pad_w < 0) {
    throw std::invalid_argument("conv2d: invalid stride/padding");
  }
}

}  // namespace

std::int64_t conv_out_extent(std::int64_t in, std::int64_t kernel, int stride, int pad) {
  const std::int64_t span = in + 2 * pad - kernel;
  if (span < 0 || stride < 1) {
    throw std::invalid_argument("conv2d: kernel extent " + std::to_string(kernel) +
                                " does not fit input extent " + std::to_string(in) +
                                " with padding " + std::to_string(pad));
  }
  return span / stride + 1;
}

void gemm(std::int64_t m, std::int64_t n, std::int64_t k, const float* a, std::ptrdiff_t a_rs,
          std::ptrdiff_t a_cs, const float* b, float* c) {
  using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ColMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
  Eigen::Map<const RowMat> bm(b, k, n);
  Eigen::Map<RowMat> cm(c, m, n);
  if (m == 0 || n == 0) return;
  if (k == 0) {
    cm.setZero();
  } else if (a_cs == 1) {
    Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> am(a, m, k, Eigen::OuterStride<>(a_rs));
    cm.noalias() = am * bm;
  } else if (a_rs == 1) {
    Eigen::Map<const ColMat, 0, Eigen::OuterStride<>> am(a, m, k, Eigen::OuterStride<>(a_cs));
    cm.noalias() = am * bm;
  } else {
    RowMat am(m, k);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < k; ++j) am(i, j) = a[i * a_rs + j * a_cs];
    cm.noalias() = am * bm;
  }
}

Tensor transpose2d(const Tensor& a) {
  require_rank(a, 2, "transpose", "operand");
  const auto r = a.dim(0), c = a.dim(1);
  Tensor t({c, r});
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  return t;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul", "lhs");
  require_rank(b, 2, "matmul", "rhs");
  if (a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  }
  Tensor c({a.dim(0), b.dim(1)});
  gemm(a.dim(0), b.dim(1), a.dim(1), a.ptr(), a.dim(1), 1, b.ptr(), c.ptr());
  return c;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Conv2dAttrs& attrs) {
  check_conv(x, w.shape(), attrs);
  const auto n = x.dim(0), o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto ho = conv_out_extent(x.dim(2), kh, attrs.stride_h, attrs.pad_h);
  const auto wo = conv_out_extent(x.dim(3), kw, attrs.stride_w, attrs.pad_w);
  const std::int64_t kdim = w.dim(1) * kh * kw;
  const std::int64_t pdim = n * ho * wo;
  const auto col = im2col(x, kh, kw, ho, wo, attrs);
  std::vector<float> flat(static_cast<std::size_t>(o * pdim));
  gemm(o, pdim, kdim, w.ptr(), kdim, 1, col.data(), flat.data());
  Tensor out({n, o, ho, wo});
  const std::int64_t plane = ho * wo;
  for (std::int64_t oi = 0; oi < o; ++oi)
    for (std::int64_t ni = 0; ni < n; ++ni)
      std::copy_n(flat.data() + oi * pdim + ni * plane, plane,
                  out.ptr() + (ni * o + oi) * plane);
  return out;
}

namespace {

// [N, O, HO, WO] -> [O, N*HO*WO]
std::vector<float> grad_to_rows(const Tensor& g) {
  const auto n = g.dim(0), o = g.dim(1), plane = g.dim(2) * g.dim(3);
  std::vector<float> rows(g.numel());
  for (std::int64_t oi = 0; oi < o; ++oi)
    for (std::int64_t ni = 0; ni < n; ++ni)
      std::copy_n(g.ptr() + (ni * o + oi) * plane, plane,
                  rows.data() + oi * n * plane + ni * plane);
  return rows;
}

}  // namespace

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& w, const Shape& x_shape,
                         const Conv2dAttrs& attrs) {
  const auto o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto ho = grad_out.dim(2), wo = grad_out.dim(3);
  const std::int64_t kdim = w.dim(1) * kh * kw;
  const std::int64_t pdim = x_shape[0] * ho * wo;
  const auto rows = grad_to_rows(grad_out);
  std::vector<float> dcol(static_cast<std::size_t>(kdim * pdim));
  // dcol = W^T * dOut, W read transposed in place.
  gemm(kdim, pdim, o, w.ptr(), 1, kdim, rows.data(), dcol.data());
  return col2im(dcol, x_shape, kh, kw, ho, wo, attrs);
}

Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& x, const Shape& w_shape,
                          const Conv2dAttrs& attrs) {
  const auto o = w_shape[0], kh = w_shape[2], kw = w_shape[3];
  const auto ho = grad_out.dim(2), wo = grad_out.dim(3);
  const std::int64_t kdim = w_shape[1] * kh * kw;
  const std::int64_t pdim = x.dim(0) * ho * wo;
  const auto rows = grad_to_rows(grad_out);
  const auto col = im2col(x, kh, kw, ho, wo, attrs);
  std::vector<float> col_t(col.size());
  for (std::int64_t kk = 0; kk < kdim; ++kk)
    for (std::int64_t p = 0; p < pdim; ++p) col_t[p * kdim + kk] = col[kk * pdim + p];
  Tensor dw(w_shape);
  gemm(o, kdim, pdim, rows.data(), pdim, 1, col_t.data(), dw.ptr());
  return dw;
}

Tensor conv2d_reference(const Tensor& x, const Tensor& w, const Conv2dAttrs& a) {
  check_conv(x, w.shape(), a);
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const auto o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const auto ho = conv_out_extent(h, kh, a.stride_h, a.pad_h);
  const auto wo = conv_out_extent(wd, kw, a.stride_w, a.pad_w);
  Tensor out({n, o, ho, wo});
  for (std::int64_t ni = 0; ni < n; ++ni)
    for (std::int64_t oi = 0; oi < o; ++oi)
      for (std::int64_t y = 0; y < ho; ++y)
        for (std::int64_t xo = 0; xo < wo; ++xo) {
          double s = 0.0;
          for (std::int64_t ci = 0; ci < c; ++ci)
            for (std::int64_t ki = 0; ki < kh; ++ki)
              for (std::int64_t kj = 0; kj < kw; ++kj) {
                const auto ih = y * a.stride_h - a.pad_h + ki;
                const auto iw = xo * a.stride_w - a.pad_w + kj;
                if (ih < 0 || ih >= h || iw < 0 || iw >= wd) continue;
                s += static_cast<double>(x[((ni * c + ci) * h + ih) * wd + iw]) *
                     w[((oi * c + ci) * kh + ki) * kw + kj];
              }
          out[((ni * o + oi) * ho + y) * wo + xo] = static_cast<float>(s);
        }
  return out;
}

Tensor mean_pool(const Tensor& x, int k) {
  require_rank(x, 4, "mean_pool", "input");
  if (k < 1 || x.dim(2) % k != 0 || x.dim(3) % k != 0) {
    throw std::invalid_argument("mean_pool: window " + std::to_string(k) +
                                " does not tile input " + shape_str(x.shape()));
  }
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const auto ho = h / k, wo = w / k;
  Tensor out({n, c, ho, wo});
  const double inv = 1.0 / (static_cast<double>(k) * k);
  for (std::int64_t p = 0; p < n * c; ++p) {
    const float* src = x.ptr() + p * h * w;
    float* dst = out.ptr() + p * ho * wo;
    for (std::int64_t y = 0; y < ho; ++y)
      for (std::int64_t xo = 0; xo < wo; ++xo) {
        double s = 0.0;
        for (int i = 0; i < k; ++i)
          for (int j = 0; j < k; ++j) s += src[(y * k + i) * w + xo * k + j];
        dst[y * wo + xo] = static_cast<float>(s * inv);
      }
  }
  return out;
}

Tensor mean_pool_grad(const Tensor& grad_out, const Shape& x_shape, int k) {
  const auto h = x_shape[2], w = x_shape[3];
  const auto ho = h / k, wo = w / k;
  Tensor dx(x_shape);
  const float inv = 1.0f / static_cast<float>(k * k);
  for (std::int64_t p = 0; p < x_shape[0] * x_shape[1]; ++p) {
    const float* g = grad_out.ptr() + p * ho * wo;
    float* d = dx.ptr() + p * h * w;
    for (std::int64_t y = 0; y < h; ++y)
      for (std::int64_t xo = 0; xo < w; ++xo) d[y * w + xo] = g[(y / k) * wo + xo / k] * inv;
  }
  return dx;
}

}  // namespace dfc::kernels
