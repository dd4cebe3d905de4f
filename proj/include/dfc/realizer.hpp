// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Turns a learned selection state into a smaller network: binarized masks
// remove filters, the learned thresholds pick ranks, and layers are replaced
// by two thinner factors when that saves work.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfc/compressor.hpp"
#include "dfc/linalg.hpp"
#include "dfc/model.hpp"

namespace dfc::realize {

struct Binarized {
  std::vector<std::vector<bool>> keep;
  std::vector<std::string> warnings;
};

/// keep = m >= 0.5 for prunable units, all true otherwise. A unit that would
/// lose every filter keeps its largest mask entry and records a warning.
Binarized binarize_masks(const model::ModelGraph& m, const compress::SelectionState& state);

/// Removes dropped filters, the matching batchnorm channels and the input
/// channels (or flattened input columns) of the following layer.
model::ModelGraph prune(const model::ModelGraph& m, const std::vector<std::vector<bool>>& keep);

/// Per-unit rank r = max(1, round(soft_rank)) measured on the spectrum of the
/// pruned weight, capped at the matrix rank bound.
std::vector<std::int64_t> select_ranks(const model::ModelGraph& pruned,
                                       const compress::SelectionState& state);

/// True when a rank-r factorization is cheaper than the dense layer.
bool should_decompose(const model::Layer& l, std::int64_t r, linalg::Scheme scheme);

/// Replaces layer `index` by its rank-r truncated SVD under `scheme`. The
/// kept singular values are reduced by `shrink` (clipped at zero).
void factorize_layer(model::ModelGraph& m, std::size_t index, std::int64_t r,
                     linalg::Scheme scheme, double shrink = 0.0);

struct UnitPlan {
  std::size_t layer = 0;
  std::int64_t filters_before = 0;
  std::int64_t filters_after = 0;
  double gamma = 0.0;
  double soft_rank = 0.0;
  std::int64_t rank = 0;
  /// Rank bound of the pruned matricized weight.
  std::int64_t full_rank = 0;
  bool decomposed = false;
};

struct RealizeOptions {
  /// When false, only filter pruning is applied.
  bool factorize = true;
  /// Deploy sigma - gamma instead of sigma in the factors.
  bool shrink = false;
};

struct RealizeResult {
  model::ModelGraph model;
  std::vector<UnitPlan> plan;
  std::vector<std::string> warnings;
  std::int64_t flops = 0;
  std::int64_t dense_flops = 0;
  std::int64_t params = 0;
  std::int64_t dense_params = 0;

  double flop_ratio() const {
    return dense_flops == 0 ? 0.0 : static_cast<double>(flops) / static_cast<double>(dense_flops);
  }
  double param_ratio() const {
    return dense_params == 0 ? 0.0
                             : static_cast<double>(params) / static_cast<double>(dense_params);
  }
};

RealizeResult realize(const model::ModelGraph& m, const compress::SelectionState& state,
                      const RealizeOptions& options = {});

/// One line per unit plus totals.
std::string plan_report(const RealizeResult& r);

}  // namespace dfc::realize
