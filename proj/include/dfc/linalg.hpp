// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Matricization of weight tensors, SVD, singular value thresholding (SVT) and
// the SVT vector-Jacobian product. Everything here runs in double precision.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfc/tensor.hpp"

namespace dfc::linalg {

/// Dense row-major double matrix.
struct Matrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::int64_t r, std::int64_t c, double fill = 0.0);

  double& operator()(std::int64_t i, std::int64_t j) { return data[i * cols + j]; }
  double operator()(std::int64_t i, std::int64_t j) const { return data[i * cols + j]; }

  static Matrix identity(std::int64_t n);
  static Matrix diagonal(const std::vector<double>& d);
  /// Rank-2 tensor to matrix.
  static Matrix from_tensor(const Tensor& t);
  Tensor to_tensor() const;
  Matrix transposed() const;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// How a 4-D kernel (C_out, C_in, kh, kw) is unfolded into a matrix.
///
/// kFilterWise: one row per filter, C_out x (C_in*kh*kw). Factors deploy as a
///   kh x kw convolution with r filters followed by a 1x1 convolution.
/// kSpatialSeparable: rows index (filter, kernel column), columns index
///   (input channel, kernel row): (C_out*kw) x (C_in*kh). Factors deploy as a
///   kh x 1 convolution followed by a 1 x kw convolution.
enum class Scheme { kFilterWise = 1, kSpatialSeparable = 2 };

Scheme parse_scheme(const std::string& text);
std::string to_string(Scheme s);

struct MatricizationSpec {
  Scheme scheme = Scheme::kFilterWise;
  /// (C_out, C_in, kh, kw), or (C_out, C_in) for a linear layer.
  Shape original_shape;

  std::int64_t rows() const;
  std::int64_t cols() const;
  /// Number of consecutive matrix rows that belong to one output filter.
  std::int64_t rows_per_filter() const;
};

/// index[row * cols + col] is the flat tensor offset stored at that position.
std::vector<std::int64_t> matricize_index(const MatricizationSpec& spec);
Matrix matricize(const Tensor& t, const MatricizationSpec& spec);
Tensor dematricize(const Matrix& m, const MatricizationSpec& spec);

/// X = U diag(sigma) V^T with sigma non-increasing.
struct SvdFactors {
  Matrix u;                             // m x r
  std::vector<double> singular_values;  // r
  Matrix v;                             // n x r

  std::int64_t rank() const { return static_cast<std::int64_t>(singular_values.size()); }
  Matrix reconstruct() const;
};

class SvdError : public std::runtime_error {
 public:
  SvdError(const std::string& what, int sweeps, double off_diagonal)
      : std::runtime_error(what), sweeps_(sweeps), off_diagonal_(off_diagonal) {}
  int sweeps() const { return sweeps_; }
  double off_diagonal() const { return off_diagonal_; }

 private:
  int sweeps_;
  double off_diagonal_;
};

/// Relative cutoff below which singular values do not count toward the rank.
inline constexpr double kRankTolerance = 1e-7;

/// SVT drops a component when sigma_i - gamma is at round-off level, at most
/// this fraction of sigma_1, so a threshold equal to a singular value removes it.
inline constexpr double kSvtTieTolerance = 64.0 * 2.220446049250313e-16;

/// One-sided Jacobi SVD keeping all min(m, n) components. Columns of U that
/// belong to (numerically) zero singular values are completed to an
/// orthonormal basis. Equal singular values keep their original column order
/// and the first non-zero entry of every U column is non-negative.
SvdFactors thin_svd(const Matrix& x);

/// Singular values only (non-increasing, min(m, n) of them).
std::vector<double> svd_values(const Matrix& x);

/// Thin SVD truncated to the numerical rank (sigma_i >= 1e-7 * sigma_1).
SvdFactors svd(const Matrix& x);

std::int64_t numerical_rank(const std::vector<double>& singular_values);
std::int64_t numerical_rank(const Matrix& x);

/// U diag([sigma - gamma]_+) V^T. Throws std::invalid_argument for gamma < 0.
Matrix svt(const Matrix& x, double gamma);
Matrix svt(const SvdFactors& factors, double gamma);

enum class SvdGradMode {
  /// U and V are functions of X; the complete differential.
  kFull,
  /// Only the singular values carry gradient; U and V are held constant.
  kSingularValuesOnly,
};

SvdGradMode parse_svd_grad_mode(const std::string& text);
std::string to_string(SvdGradMode m);

struct SvtVjpOptions {
  SvdGradMode mode = SvdGradMode::kFull;
  /// Reject spectra whose singular values are closer than
  /// `min_separation * sigma_1` instead of relying on the clamped formula.
  bool checked = false;
  double min_separation = 1e-5;
};

struct SvtGrad {
  Matrix dx;
  double dgamma = 0.0;
};

/// Pullback of Y = SVT(X, gamma) for upstream dL/dY.
SvtGrad svt_vjp(const Matrix& x, double gamma, const Matrix& upstream,
                const SvtVjpOptions& options = {});
/// Same, reusing the thin SVD of X from the forward pass.
SvtGrad svt_vjp(const SvdFactors& thin, double gamma, const Matrix& upstream,
                const SvtVjpOptions& options = {});

}  // namespace dfc::linalg
