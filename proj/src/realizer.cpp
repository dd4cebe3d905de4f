// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/realizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dfc/budget.hpp"

namespace dfc::realize {

using model::Layer;
using model::LayerKind;
using model::ModelGraph;

namespace {

std::vector<std::int64_t> kept_indices(const std::vector<bool>& keep) {
  std::vector<std::int64_t> idx;
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i]) idx.push_back(static_cast<std::int64_t>(i));
  return idx;
}

Tensor take(const Tensor& t, const std::vector<std::int64_t>& idx) {
  Tensor out({static_cast<std::int64_t>(idx.size())});
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = t[idx[i]];
  return out;
}

/// Keeps output rows `rows` and input groups `cols` (each `group` wide along
/// the flattened input axis) of a [c_out, c_in, ...] weight.
Tensor slice_weight(const Tensor& w, const std::vector<std::int64_t>& rows,
                    const std::vector<std::int64_t>& cols, std::int64_t group) {
  const auto c_in = w.dim(1);
  std::int64_t inner = 1;
  for (std::size_t a = 2; a < w.rank(); ++a) inner *= w.dim(a);
  Shape shape = w.shape();
  shape[0] = static_cast<std::int64_t>(rows.size());
  shape[1] = static_cast<std::int64_t>(cols.size()) * group;
  Tensor out(shape);
  const auto block = group * inner;
  float* dst = out.ptr();
  for (auto r : rows)
    for (auto c : cols) {
      const float* src = w.ptr() + (r * c_in + c * group) * inner;
      dst = std::copy_n(src, block, dst);
    }
  return out;
}

/// Linear weights are always matricized as [c_out, c_in].
linalg::MatricizationSpec spec_of(const Layer& l, linalg::Scheme scheme) {
  return {l.kind == LayerKind::kLinear ? linalg::Scheme::kFilterWise : scheme, l.w.shape()};
}

double pruned_soft_rank(const Layer& l, const compress::SelectionState& state, std::size_t u) {
  const auto sigma = linalg::svd_values(linalg::matricize(l.w, spec_of(l, state.scheme)));
  return budget::soft_rank(sigma, state.gammas[u], state.tau[u]);
}

}  // namespace

Binarized binarize_masks(const ModelGraph& m, const compress::SelectionState& state) {
  const auto units = m.units();
  if (state.masks.size() != units.size()) {
    throw std::invalid_argument("binarize_masks: state has " + std::to_string(state.masks.size()) +
                                " units, model has " + std::to_string(units.size()));
  }
  Binarized b;
  for (std::size_t u = 0; u < units.size(); ++u) {
    std::vector<bool> keep(static_cast<std::size_t>(units[u].c_out), true);
    if (units[u].prunable) {
      const Tensor& mask = state.masks[u];
      if (static_cast<std::int64_t>(mask.numel()) != units[u].c_out) {
        throw std::invalid_argument("binarize_masks: mask " + std::to_string(u) + " has " +
                                    std::to_string(mask.numel()) + " entries for " +
                                    std::to_string(units[u].c_out) + " filters");
      }
      bool any = false;
      for (std::size_t i = 0; i < keep.size(); ++i) {
        keep[i] = mask[i] >= 0.5f;
        any = any || keep[i];
      }
      if (!any) {
        const auto top = std::max_element(mask.data().begin(), mask.data().end()) -
                         mask.data().begin();
        keep[top] = true;
        b.warnings.push_back("unit " + std::to_string(u) + " (layer " +
                             std::to_string(units[u].layer) +
                             ") lost every filter; keeping filter " + std::to_string(top));
      }
    }
    b.keep.push_back(std::move(keep));
  }
  return b;
}

ModelGraph prune(const ModelGraph& m, const std::vector<std::vector<bool>>& keep) {
  const auto units = m.units();
  if (keep.size() != units.size()) {
    throw std::invalid_argument("prune: expected " + std::to_string(units.size()) + " masks");
  }
  ModelGraph out = m;
  std::vector<std::int64_t> in_keep(static_cast<std::size_t>(m.input.channels));
  for (std::size_t c = 0; c < in_keep.size(); ++c) in_keep[c] = static_cast<std::int64_t>(c);
  std::size_t u = 0;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    Layer& l = out.layers[i];
    if (l.kind == LayerKind::kBatchNorm) {
      for (Tensor* t : {&l.gamma, &l.beta, &l.running_mean, &l.running_var}) *t = take(*t, in_keep);
      continue;
    }
    if (!l.is_weighted()) continue;
    const auto& g = units[u];
    if (static_cast<std::int64_t>(keep[u].size()) != g.c_out) {
      throw std::invalid_argument("prune: mask " + std::to_string(u) + " has " +
                                  std::to_string(keep[u].size()) + " entries for " +
                                  std::to_string(g.c_out) + " filters");
    }
    const auto rows = kept_indices(keep[u]);
    if (rows.empty()) throw std::invalid_argument("prune: unit " + std::to_string(u) + " keeps no filters");
    const std::int64_t group = l.kind == LayerKind::kLinear ? g.kernel_area : 1;
    l.w = slice_weight(l.w, rows, in_keep, group);
    l.c_out = static_cast<std::int64_t>(rows.size());
    l.c_in = static_cast<std::int64_t>(in_keep.size()) * group;
    if (l.has_bias) l.bias = take(l.bias, rows);
    in_keep = rows;
    ++u;
  }
  out.infer_shapes();
  return out;
}

std::vector<std::int64_t> select_ranks(const ModelGraph& pruned,
                                       const compress::SelectionState& state) {
  const auto units = pruned.units();
  if (state.gammas.size() != units.size() || state.tau.size() != units.size()) {
    throw std::invalid_argument("select_ranks: state does not match the model");
  }
  std::vector<std::int64_t> ranks;
  for (std::size_t u = 0; u < units.size(); ++u) {
    const Layer& l = pruned.layers[units[u].layer];
    const auto spec = spec_of(l, state.scheme);
    const double soft = pruned_soft_rank(l, state, u);
    const auto bound = std::min(spec.rows(), spec.cols());
    ranks.push_back(std::clamp<std::int64_t>(std::llround(soft), 1, bound));
  }
  return ranks;
}

bool should_decompose(const Layer& l, std::int64_t r, linalg::Scheme scheme) {
  if (l.kind == LayerKind::kLinear) return r * (l.c_in + l.c_out) < l.c_in * l.c_out;
  const std::int64_t k2 = static_cast<std::int64_t>(l.kh) * l.kw;
  if (scheme == linalg::Scheme::kFilterWise) return r * (k2 * l.c_in + l.c_out) < k2 * l.c_in * l.c_out;
  return r * (l.kh * l.c_in + l.kw * l.c_out) < k2 * l.c_in * l.c_out;
}

void factorize_layer(ModelGraph& m, std::size_t index, std::int64_t r, linalg::Scheme scheme,
                     double shrink) {
  if (!(shrink >= 0.0)) throw std::invalid_argument("factorize_layer: shrink must be >= 0");
  if (index >= m.layers.size() || !m.layers[index].is_weighted() || m.layers[index].factorized) {
    throw std::invalid_argument("factorize_layer: layer " + std::to_string(index) +
                                " is not a dense conv/linear layer");
  }
  Layer& l = m.layers[index];
  if (l.kind == LayerKind::kLinear) scheme = linalg::Scheme::kFilterWise;
  const auto spec = spec_of(l, scheme);
  const auto f = linalg::thin_svd(linalg::matricize(l.w, spec));
  if (r < 1 || r > f.rank()) {
    throw std::invalid_argument("factorize_layer: rank " + std::to_string(r) + " outside [1, " +
                                std::to_string(f.rank()) + "]");
  }
  const auto rows = spec.rows(), cols = spec.cols();
  // W ~ (U_r diag(sigma_r)) V_r^T; the singular values go into the second factor.
  std::vector<float> a(static_cast<std::size_t>(rows * r)), b(static_cast<std::size_t>(r * cols));
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t k = 0; k < r; ++k)
      a[i * r + k] = static_cast<float>(f.u(i, k) * std::max(0.0, f.singular_values[k] - shrink));
  for (std::int64_t k = 0; k < r; ++k)
    for (std::int64_t j = 0; j < cols; ++j) b[k * cols + j] = static_cast<float>(f.v(j, k));

  if (l.kind == LayerKind::kLinear) {
    l.w1 = Tensor({r, l.c_in}, std::move(b));
    l.w2 = Tensor({l.c_out, r}, std::move(a));
  } else if (scheme == linalg::Scheme::kFilterWise) {
    l.w1 = Tensor({r, l.c_in, l.kh, l.kw}, std::move(b));
    l.w2 = Tensor({l.c_out, r, 1, 1}, std::move(a));
  } else {
    // Columns are (input channel, kernel row); rows are (filter, kernel column).
    Tensor w1({r, l.c_in, l.kh, 1});
    for (std::int64_t k = 0; k < r; ++k)
      for (std::int64_t j = 0; j < cols; ++j) w1[k * cols + j] = b[k * cols + j];
    Tensor w2({l.c_out, r, 1, l.kw});
    for (std::int64_t o = 0; o < l.c_out; ++o)
      for (std::int64_t x = 0; x < l.kw; ++x)
        for (std::int64_t k = 0; k < r; ++k)
          w2[(o * r + k) * l.kw + x] = a[(o * l.kw + x) * r + k];
    l.w1 = std::move(w1);
    l.w2 = std::move(w2);
  }
  l.factorized = true;
  l.rank = r;
  l.scheme = scheme;
  l.w = Tensor();
  m.infer_shapes();
}

RealizeResult realize(const ModelGraph& m, const compress::SelectionState& state,
                      const RealizeOptions& options) {
  const auto units = m.units();
  auto bin = binarize_masks(m, state);
  RealizeResult res;
  res.warnings = bin.warnings;
  res.model = prune(m, bin.keep);
  const auto pruned_units = res.model.units();
  if (state.gammas.size() != units.size() || state.tau.size() != units.size()) {
    throw std::invalid_argument("realize: state does not match the model");
  }
  for (std::size_t u = 0; u < units.size(); ++u) {
    UnitPlan p;
    p.layer = units[u].layer;
    p.filters_before = units[u].c_out;
    p.filters_after = pruned_units[u].c_out;
    p.gamma = state.gammas[u];
    const Layer& l = res.model.layers[p.layer];
    const auto spec = spec_of(l, state.scheme);
    p.full_rank = std::min(spec.rows(), spec.cols());
    p.soft_rank = pruned_soft_rank(l, state, u);
    if (options.factorize) {
      p.rank = std::clamp<std::int64_t>(std::llround(p.soft_rank), 1, p.full_rank);
      p.decomposed = should_decompose(l, p.rank, state.scheme);
    } else {
      p.rank = p.full_rank;
    }
    res.plan.push_back(p);
  }
  for (const auto& p : res.plan)
    if (p.decomposed)
      factorize_layer(res.model, p.layer, p.rank, state.scheme, options.shrink ? p.gamma : 0.0);
  res.flops = model::count_flops(res.model);
  res.dense_flops = model::count_flops(m);
  res.params = model::param_count(res.model);
  res.dense_params = model::param_count(m);
  return res;
}

std::string plan_report(const RealizeResult& r) {
  std::ostringstream os;
  os << "unit layer filters rank soft_rank gamma decomposed\n";
  for (std::size_t u = 0; u < r.plan.size(); ++u) {
    const auto& p = r.plan[u];
    os << u << ' ' << p.layer << ' ' << p.filters_after << '/' << p.filters_before << ' '
       << p.rank << '/' << p.full_rank << ' ' << p.soft_rank << ' ' << p.gamma << ' '
       << (p.decomposed ? "yes" : "no") << '\n';
  }
  os << "flops " << r.flops << '/' << r.dense_flops << " (" << r.flop_ratio() << ")\n";
  os << "params " << r.params << '/' << r.dense_params << " (" << r.param_ratio() << ")\n";
  for (const auto& w : r.warnings) os << "warning: " << w << '\n';
  return os.str();
}

}  // namespace dfc::realize
