// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dfc::linalg {

Matrix::Matrix(std::int64_t r, std::int64_t c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {
  if (r < 0 || c < 0) throw std::invalid_argument("matrix dimensions must be non-negative");
}

Matrix Matrix::identity(std::int64_t n) {
  Matrix m(n, n);
  for (std::int64_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diagonal(const std::vector<double>& d) {
  const auto n = static_cast<std::int64_t>(d.size());
  Matrix m(n, n);
  for (std::int64_t i = 0; i < n; ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::from_tensor(const Tensor& t) {
  if (t.rank() != 2) {
    throw std::invalid_argument("matrix from tensor: expected rank 2, got " +
                                shape_str(t.shape()));
  }
  Matrix m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.numel(); ++i) m.data[i] = t[i];
  return m;
}

Tensor Matrix::to_tensor() const {
  std::vector<float> v(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) v[i] = static_cast<float>(data[i]);
  return Tensor({rows, cols}, std::move(v));
}

Matrix Matrix::transposed() const {
  Matrix t(cols, rows);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) {
    throw std::invalid_argument("matmul: " + std::to_string(a.rows) + "x" +
                                std::to_string(a.cols) + " times " + std::to_string(b.rows) +
                                "x" + std::to_string(b.cols));
  }
  Matrix c(a.rows, b.cols);
  for (std::int64_t i = 0; i < a.rows; ++i) {
    double* crow = c.data.data() + i * c.cols;
    for (std::int64_t k = 0; k < a.cols; ++k) {
      const double av = a(i, k);
      const double* brow = b.data.data() + k * b.cols;
      for (std::int64_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: row count mismatch");
  Matrix c(a.cols, b.cols);
  for (std::int64_t p = 0; p < a.rows; ++p) {
    const double* brow = b.data.data() + p * b.cols;
    for (std::int64_t i = 0; i < a.cols; ++i) {
      const double av = a(p, i);
      double* crow = c.data.data() + i * c.cols;
      for (std::int64_t j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) { return matmul(a, b.transposed()); }

double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw std::invalid_argument("max_abs_diff: matrix shape mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

Scheme parse_scheme(const std::string& text) {
  if (text == "1" || text == "filter" || text == "scheme1") return Scheme::kFilterWise;
  if (text == "2" || text == "separable" || text == "scheme2") return Scheme::kSpatialSeparable;
  throw std::invalid_argument("unknown matricization scheme '" + text + "' (expected 1 or 2)");
}

std::string to_string(Scheme s) { return s == Scheme::kFilterWise ? "1" : "2"; }

namespace {

struct Dims4 {
  std::int64_t out, in, kh, kw;
};

Dims4 dims_of(const Shape& s) {
  if (s.size() == 2) return {s[0], s[1], 1, 1};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3]};
  throw std::invalid_argument("matricization needs a rank-2 or rank-4 shape, got " +
                              shape_str(s));
}

}  // namespace

std::int64_t MatricizationSpec::rows() const {
  const auto d = dims_of(original_shape);
  return scheme == Scheme::kFilterWise ? d.out : d.out * d.kw;
}

std::int64_t MatricizationSpec::cols() const {
  const auto d = dims_of(original_shape);
  return scheme == Scheme::kFilterWise ? d.in * d.kh * d.kw : d.in * d.kh;
}

std::int64_t MatricizationSpec::rows_per_filter() const {
  return scheme == Scheme::kFilterWise ? 1 : dims_of(original_shape).kw;
}

std::vector<std::int64_t> matricize_index(const MatricizationSpec& spec) {
  const auto d = dims_of(spec.original_shape);
  const auto rows = spec.rows(), cols = spec.cols();
  std::vector<std::int64_t> index(static_cast<std::size_t>(rows * cols));
  if (spec.scheme == Scheme::kFilterWise) {
    std::iota(index.begin(), index.end(), std::int64_t{0});
    return index;
  }
  // row = o*kw + w, col = i*kh + h  <-  tensor (o, i, h, w)
  for (std::int64_t o = 0; o < d.out; ++o)
    for (std::int64_t w = 0; w < d.kw; ++w)
      for (std::int64_t i = 0; i < d.in; ++i)
        for (std::int64_t h = 0; h < d.kh; ++h) {
          const auto row = o * d.kw + w, col = i * d.kh + h;
          index[row * cols + col] = ((o * d.in + i) * d.kh + h) * d.kw + w;
        }
  return index;
}

Matrix matricize(const Tensor& t, const MatricizationSpec& spec) {
  if (t.shape() != spec.original_shape) {
    throw std::invalid_argument("matricize: tensor " + shape_str(t.shape()) +
                                " does not match spec shape " +
                                shape_str(spec.original_shape));
  }
  const auto index = matricize_index(spec);
  Matrix m(spec.rows(), spec.cols());
  for (std::size_t p = 0; p < index.size(); ++p) m.data[p] = t[index[p]];
  return m;
}

Tensor dematricize(const Matrix& m, const MatricizationSpec& spec) {
  if (m.rows != spec.rows() || m.cols != spec.cols()) {
    throw std::invalid_argument("dematricize: matrix " + std::to_string(m.rows) + "x" +
                                std::to_string(m.cols) + " does not match spec shape " +
                                shape_str(spec.original_shape));
  }
  const auto index = matricize_index(spec);
  Tensor t(spec.original_shape);
  for (std::size_t p = 0; p < index.size(); ++p) t[index[p]] = static_cast<float>(m.data[p]);
  return t;
}

Matrix SvdFactors::reconstruct() const {
  Matrix us = u;
  for (std::int64_t i = 0; i < us.rows; ++i)
    for (std::int64_t j = 0; j < us.cols; ++j) us(i, j) *= singular_values[j];
  return matmul_nt(us, v);
}

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOrthTolerance = 1e-15;

double dot(const double* a, const double* b, std::int64_t n) {
  // Four partial sums so the loop vectorizes; the order is fixed.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// In-place Householder QR of the column-major len x k matrix `a` (len > k).
// Returns R (k x k, column-major); reflector j is stored below the diagonal
// of column j of `a` with its leading entry in `head[j]`.
struct Householder {
  std::vector<double> head;
  std::vector<double> beta;
};

std::vector<double> householder_qr(std::vector<double>& a, std::int64_t len, std::int64_t k,
                                   Householder& h) {
  h.head.assign(static_cast<std::size_t>(k), 0.0);
  h.beta.assign(static_cast<std::size_t>(k), 0.0);
  std::vector<double> r(static_cast<std::size_t>(k * k), 0.0);
  for (std::int64_t j = 0; j < k; ++j) {
    double* col = a.data() + j * len;
    const double norm = std::sqrt(dot(col + j, col + j, len - j));
    double diag = col[j];
    if (norm > 0.0) {
      const double alpha = diag >= 0.0 ? -norm : norm;
      // v = x - alpha e1, stored in place with v[0] in head.
      const double v0 = diag - alpha;
      col[j] = v0;
      const double vnorm2 = dot(col + j, col + j, len - j);
      const double beta = vnorm2 > 0.0 ? 2.0 / vnorm2 : 0.0;
      h.beta[j] = beta;
      for (std::int64_t c = j + 1; c < k; ++c) {
        double* other = a.data() + c * len;
        const double f = beta * dot(col + j, other + j, len - j);
        for (std::int64_t i = j; i < len; ++i) other[i] -= f * col[i];
      }
      diag = alpha;
    }
    h.head[j] = col[j];
    for (std::int64_t i = 0; i < j; ++i) r[j * k + i] = col[i];
    r[j * k + j] = diag;
  }
  return r;
}

// y (length len, leading k entries set, rest zero) <- Q y.
void apply_q(const std::vector<double>& a, std::int64_t len, std::int64_t k, const Householder& h,
             double* y) {
  for (std::int64_t j = k - 1; j >= 0; --j) {
    if (h.beta[j] == 0.0) continue;
    const double* col = a.data() + j * len;
    double f = h.head[j] * y[j];
    for (std::int64_t i = j + 1; i < len; ++i) f += col[i] * y[i];
    f *= h.beta[j];
    y[j] -= f * h.head[j];
    for (std::int64_t i = j + 1; i < len; ++i) y[i] -= f * col[i];
  }
}

void rotate(double* p, double* q, std::int64_t n, double c, double s) {
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = p[i], y = q[i];
    p[i] = c * x - s * y;
    q[i] = s * x + c * y;
  }
}

// Replaces column `col` of the column-major basis (length n) by a unit vector
// orthogonal to the columns listed in `filled`.
void complete_column(std::vector<double>& basis, std::int64_t n, std::int64_t col,
                     const std::vector<std::int64_t>& filled) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (std::int64_t e = 0; e < n; ++e) {
    std::fill(v.begin(), v.end(), 0.0);
    v[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (auto f : filled) {
        const double* u = basis.data() + f * n;
        const double proj = dot(u, v.data(), n);
        for (std::int64_t i = 0; i < n; ++i) v[i] -= proj * u[i];
      }
    }
    const double norm = std::sqrt(dot(v.data(), v.data(), n));
    if (norm > 0.5) {
      for (std::int64_t i = 0; i < n; ++i) basis[col * n + i] = v[i] / norm;
      return;
    }
  }
  throw std::logic_error("svd: could not complete orthonormal basis");
}

}  // namespace

static SvdFactors jacobi_svd(const Matrix& x, bool vectors) {
  for (double v : x.data) {
    if (!std::isfinite(v)) throw std::invalid_argument("svd: matrix has non-finite entries");
  }
  const bool wide = x.rows < x.cols;
  const std::int64_t len = wide ? x.cols : x.rows;
  const std::int64_t k = wide ? x.rows : x.cols;

  // Column-major working copy of A = X (tall) or X^T (wide).
  std::vector<double> a(static_cast<std::size_t>(len * k));
  for (std::int64_t i = 0; i < x.rows; ++i)
    for (std::int64_t j = 0; j < x.cols; ++j) {
      if (wide) a[i * len + j] = x(i, j);
      else a[j * len + i] = x(i, j);
    }
  std::vector<double> w(static_cast<std::size_t>(k * k), 0.0);
  for (std::int64_t i = 0; i < k; ++i) w[i * k + i] = 1.0;

  // Long columns are reduced to the triangular factor first; the rotations
  // then act on length-k columns and the left vectors are mapped back by Q.
  const bool reduce = len > k;
  Householder h;
  std::vector<double> qr;
  const std::int64_t wl = reduce ? k : len;
  if (reduce) {
    qr = std::move(a);
    a = householder_qr(qr, len, k, h);
  }

  bool converged = false;
  int sweep = 0;
  double off = 0.0;
  for (; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    off = 0.0;
    for (std::int64_t p = 0; p + 1 < k; ++p) {
      double* ap = a.data() + p * wl;
      for (std::int64_t q = p + 1; q < k; ++q) {
        double* aq = a.data() + q * wl;
        const double alpha = dot(ap, ap, wl);
        const double beta = dot(aq, aq, wl);
        const double gamma = dot(ap, aq, wl);
        if (alpha == 0.0 || beta == 0.0) continue;
        const double rel = std::abs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, rel);
        if (rel <= kOrthTolerance) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(ap, aq, wl, c, s);
        if (vectors) rotate(w.data() + p * k, w.data() + q * k, k, c, s);
      }
    }
  }
  if (!converged) {
    std::ostringstream os;
    os << "svd: one-sided Jacobi did not converge after " << sweep
       << " sweeps (max relative off-diagonal " << off << ") on a " << x.rows << "x" << x.cols
       << " matrix";
    throw SvdError(os.str(), sweep, off);
  }

  std::vector<double> sigma(static_cast<std::size_t>(k));
  for (std::int64_t j = 0; j < k; ++j) {
    const double* aj = a.data() + j * wl;
    sigma[j] = std::sqrt(dot(aj, aj, wl));
  }
  std::vector<std::int64_t> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t l, std::int64_t r) { return sigma[l] > sigma[r]; });
  if (!vectors) {
    SvdFactors f;
    for (auto j : order) f.singular_values.push_back(sigma[j]);
    return f;
  }

  // Normalise the rotated columns; exact zeros get an orthonormal completion.
  std::vector<std::int64_t> filled;
  std::vector<std::int64_t> zero_cols;
  for (auto j : order) {
    if (sigma[j] > 1e-300) {
      for (std::int64_t i = 0; i < wl; ++i) a[j * wl + i] /= sigma[j];
      filled.push_back(j);
    } else {
      zero_cols.push_back(j);
    }
  }
  for (auto j : zero_cols) {
    complete_column(a, wl, j, filled);
    filled.push_back(j);
  }
  if (reduce) {
    std::vector<double> full(static_cast<std::size_t>(len * k), 0.0);
    for (std::int64_t j = 0; j < k; ++j) {
      double* y = full.data() + j * len;
      std::copy_n(a.data() + j * wl, wl, y);
      apply_q(qr, len, k, h, y);
    }
    a = std::move(full);
  }

  SvdFactors f;
  f.singular_values.resize(static_cast<std::size_t>(k));
  f.u = Matrix(x.rows, k);
  f.v = Matrix(x.cols, k);
  for (std::int64_t c = 0; c < k; ++c) {
    const auto j = order[c];
    f.singular_values[c] = sigma[j];
    const double* left = a.data() + j * len;  // unit column of A
    const double* right = w.data() + j * k;   // column of the rotation
    // tall: U <- left (m), V <- right (n = k). wide: U <- right (m = k), V <- left (n).
    for (std::int64_t i = 0; i < x.rows; ++i) f.u(i, c) = wide ? right[i] : left[i];
    for (std::int64_t i = 0; i < x.cols; ++i) f.v(i, c) = wide ? left[i] : right[i];
  }
  for (std::int64_t c = 0; c < k; ++c) {
    for (std::int64_t i = 0; i < f.u.rows; ++i) {
      const double e = f.u(i, c);
      if (std::abs(e) <= 1e-12) continue;
      if (e < 0.0) {
        for (std::int64_t r = 0; r < f.u.rows; ++r) f.u(r, c) = -f.u(r, c);
        for (std::int64_t r = 0; r < f.v.rows; ++r) f.v(r, c) = -f.v(r, c);
      }
      break;
    }
  }
  return f;
}

std::int64_t numerical_rank(const std::vector<double>& singular_values) {
  if (singular_values.empty() || singular_values.front() <= 0.0) return 0;
  const double cutoff = kRankTolerance * singular_values.front();
  return std::count_if(singular_values.begin(), singular_values.end(),
                       [&](double s) { return s >= cutoff; });
}

std::int64_t numerical_rank(const Matrix& x) { return numerical_rank(thin_svd(x).singular_values); }

SvdFactors thin_svd(const Matrix& x) { return jacobi_svd(x, true); }

std::vector<double> svd_values(const Matrix& x) { return jacobi_svd(x, false).singular_values; }

SvdFactors svd(const Matrix& x) {
  SvdFactors thin = thin_svd(x);
  const auto r = numerical_rank(thin.singular_values);
  SvdFactors f;
  f.singular_values.assign(thin.singular_values.begin(), thin.singular_values.begin() + r);
  f.u = Matrix(x.rows, r);
  f.v = Matrix(x.cols, r);
  for (std::int64_t i = 0; i < x.rows; ++i)
    for (std::int64_t c = 0; c < r; ++c) f.u(i, c) = thin.u(i, c);
  for (std::int64_t i = 0; i < x.cols; ++i)
    for (std::int64_t c = 0; c < r; ++c) f.v(i, c) = thin.v(i, c);
  return f;
}

Matrix svt(const SvdFactors& f, double gamma) {
  if (!(gamma >= 0.0)) {
    throw std::invalid_argument("svt: threshold must be non-negative, got " +
                                std::to_string(gamma));
  }
  const auto m = f.u.rows, n = f.v.rows;
  Matrix y(m, n);
  const double tie = f.rank() > 0 ? kSvtTieTolerance * f.singular_values[0] : 0.0;
  for (std::int64_t c = 0; c < f.rank(); ++c) {
    const double shrunk = f.singular_values[c] - gamma;
    if (shrunk <= tie) continue;
    for (std::int64_t i = 0; i < m; ++i) {
      const double ui = f.u(i, c) * shrunk;
      if (ui == 0.0) continue;
      double* row = y.data.data() + i * n;
      for (std::int64_t j = 0; j < n; ++j) row[j] += ui * f.v(j, c);
    }
  }
  return y;
}

Matrix svt(const Matrix& x, double gamma) {
  if (!(gamma >= 0.0)) {
    throw std::invalid_argument("svt: threshold must be non-negative, got " +
                                std::to_string(gamma));
  }
  return svt(thin_svd(x), gamma);
}

SvdGradMode parse_svd_grad_mode(const std::string& text) {
  if (text == "full") return SvdGradMode::kFull;
  if (text == "sigma" || text == "sigma_only") return SvdGradMode::kSingularValuesOnly;
  throw std::invalid_argument("unknown svd gradient mode '" + text + "' (expected full|sigma)");
}

std::string to_string(SvdGradMode m) { return m == SvdGradMode::kFull ? "full" : "sigma"; }

SvtGrad svt_vjp(const SvdFactors& f, double gamma, const Matrix& g, const SvtVjpOptions& opt) {
  if (!(gamma >= 0.0)) {
    throw std::invalid_argument("svt_vjp: threshold must be non-negative");
  }
  const auto m = f.u.rows, n = f.v.rows, k = f.rank();
  if (g.rows != m || g.cols != n) {
    throw std::invalid_argument("svt_vjp: upstream gradient shape does not match input");
  }
  if (k != std::min(m, n)) {
    throw std::invalid_argument("svt_vjp: needs the thin SVD with min(m, n) components");
  }
  const auto& s = f.singular_values;
  if (opt.checked && k > 1) {
    const double floor = opt.min_separation * s.front();
    for (std::int64_t i = 0; i + 1 < k; ++i) {
      if (s[i] - s[i + 1] < floor) {
        std::ostringstream os;
        os << "svt_vjp: singular values " << i << " and " << i + 1 << " (" << s[i] << ", "
           << s[i + 1] << ") are closer than " << opt.min_separation
           << " * sigma_1; perturb the input with small jitter or use permissive mode";
        throw std::domain_error(os.str());
      }
    }
  }
  std::vector<double> shrunk(static_cast<std::size_t>(k));
  std::vector<bool> alive(static_cast<std::size_t>(k));
  const double tie = k > 0 ? kSvtTieTolerance * s[0] : 0.0;
  for (std::int64_t i = 0; i < k; ++i) {
    alive[i] = s[i] - gamma > tie;
    shrunk[i] = alive[i] ? s[i] - gamma : 0.0;
  }

  const Matrix t = matmul_tn(f.u, g);  // U^T G, k x n
  const Matrix gb = matmul(t, f.v);    // U^T G V, k x k

  SvtGrad out;
  for (std::int64_t i = 0; i < k; ++i) {
    if (alive[i]) out.dgamma -= gb(i, i);
  }

  Matrix p(k, k);
  if (opt.mode == SvdGradMode::kSingularValuesOnly) {
    for (std::int64_t i = 0; i < k; ++i) p(i, i) = alive[i] ? gb(i, i) : 0.0;
    out.dx = matmul_nt(matmul(f.u, p), f.v);
    return out;
  }

  // Off-diagonal coefficients of the SVD differential. With F_ij =
  // 1/(s_i^2 - s_j^2) the symmetric part carries (f_i - f_j)(s_i + s_j) F_ij and
  // the antisymmetric part (f_i + f_j)(s_i - s_j) F_ij; both are evaluated with
  // the common factor cancelled, which is exact for the soft threshold.
  constexpr double kClamp = 1e-8;
  for (std::int64_t i = 0; i < k; ++i) {
    for (std::int64_t j = 0; j < k; ++j) {
      if (i == j) {
        p(i, i) = alive[i] ? gb(i, i) : 0.0;
        continue;
      }
      double sym_coef;
      if (alive[i] && alive[j]) {
        sym_coef = 1.0;
      } else if (!alive[i] && !alive[j]) {
        sym_coef = 0.0;
      } else {
        double den = s[i] - s[j];
        if (std::abs(den) < kClamp) den = std::copysign(kClamp, den);
        sym_coef = (shrunk[i] - shrunk[j]) / den;
      }
      const double ssum = s[i] + s[j];
      const double anti_coef = ssum > 0.0 ? (shrunk[i] + shrunk[j]) / std::max(ssum, kClamp) : 0.0;
      const double sym = 0.5 * (gb(i, j) + gb(j, i));
      const double anti = 0.5 * (gb(i, j) - gb(j, i));
      p(i, j) = sym_coef * sym + anti_coef * anti;
    }
  }

  std::vector<double> ratio(static_cast<std::size_t>(k));
  for (std::int64_t i = 0; i < k; ++i) ratio[i] = alive[i] ? shrunk[i] / s[i] : 0.0;

  Matrix inner = matmul_nt(p, f.v);  // P V^T, k x n
  if (n > k) {
    // Row-space complement: U diag(ratio) (U^T G - Gb V^T).
    const Matrix gbv = matmul_nt(gb, f.v);
    for (std::int64_t i = 0; i < k; ++i)
      for (std::int64_t j = 0; j < n; ++j) inner(i, j) += ratio[i] * (t(i, j) - gbv(i, j));
  }
  out.dx = matmul(f.u, inner);
  if (m > k) {
    // Column-space complement: (G V - U Gb) diag(ratio) V^T.
    Matrix gv = matmul(g, f.v);
    const Matrix ugb = matmul(f.u, gb);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < k; ++j) gv(i, j) = (gv(i, j) - ugb(i, j)) * ratio[j];
    const Matrix extra = matmul_nt(gv, f.v);
    for (std::size_t q = 0; q < out.dx.data.size(); ++q) out.dx.data[q] += extra.data[q];
  }
  return out;
}

SvtGrad svt_vjp(const Matrix& x, double gamma, const Matrix& upstream,
                const SvtVjpOptions& options) {
  return svt_vjp(thin_svd(x), gamma, upstream, options);
}

}  // namespace dfc::linalg
