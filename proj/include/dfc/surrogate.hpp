// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// The differentiable surrogate h_DF: a scheduled-sigmoid filter mask applied
// to the matricized weight, followed by singular value thresholding.

#pragma once

#include <cstdint>
#include <vector>

#include "dfc/autodiff.hpp"
#include "dfc/linalg.hpp"

namespace dfc::surrogate {

/// mu_i = min(alpha, mu0 + i * beta) when enabled; a constant alpha otherwise.
struct SteepnessSchedule {
  double mu0 = 5.0;
  double alpha = 50.0;
  double beta = 4.0;
  bool enabled = true;

  double mu(std::int64_t iteration) const;
  /// First iteration at which mu reaches alpha.
  std::int64_t saturation_iteration() const;
  void validate() const;
};

/// 1 / (1 + exp(-mu (x - 0.5)))
double scheduled_sigmoid(double x, double mu);
Tensor scheduled_sigmoid(const Tensor& x, double mu);

/// Plain logistic sigmoid.
double sigmoid(double x);

/// Row-scales the matricized weight by phi_s(m, mu) and folds it back. m has
/// one entry per output filter; the weight itself is never a trainable input.
ad::Var apply_dml_s(const ad::Var& w, const ad::Var& m, double mu, linalg::Scheme scheme);

/// dematricize(SVT(matricize(w), gamma)). The singular values of the
/// matricized input are written to `spectrum` when given.
ad::Var apply_dtl_s(const ad::Var& w, const ad::Var& gamma, linalg::Scheme scheme,
                    const ad::SvtNodeOptions& options = {},
                    std::vector<double>* spectrum = nullptr);

/// apply_dtl_s(apply_dml_s(w, m, mu), gamma). A null mask skips the masking
/// step (layers whose outputs are not prunable).
ad::Var h_df(const ad::Var& w, const ad::Var* m, const ad::Var& gamma, double mu,
             linalg::Scheme scheme, const ad::SvtNodeOptions& options = {},
             std::vector<double>* spectrum = nullptr);

}  // namespace dfc::surrogate
