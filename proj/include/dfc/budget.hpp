// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable filter counts, soft ranks, the FLOP-ratio budget and its
// quadratic penalty. All arithmetic is in double.

#pragma once

#include <string>
#include <vector>

#include "dfc/autodiff.hpp"
#include "dfc/model.hpp"

namespace dfc::budget {

/// How masks are counted. kSigmoid uses the plain sigmoid phi(m); kScheduled
/// uses phi_s(m, mu_i), the same gate that scales the weights.
enum class CountMode { kSigmoid, kScheduled };

CountMode parse_count_mode(const std::string& text);
std::string to_string(CountMode m);

struct BudgetConfig {
  double target = 0.5;  // B_d
  double lambda = 1.0;
  double tau_c = 2.0;   // tau = tau_c / sigma_1
  void validate() const;
};

/// Sum of gate values; `grad` (optional) receives d/dm per entry.
double soft_filter_count(const std::vector<double>& m, CountMode mode, double mu,
                         std::vector<double>* grad = nullptr);

/// sum_i tanh(relu(sigma_i - gamma) * tau); `dgamma` receives the derivative.
double soft_rank(const std::vector<double>& sigma, double gamma, double tau,
                 double* dgamma = nullptr);

/// Per-unit soft counts; g_c of a non-prunable unit is its filter count.
struct SoftCounts {
  std::vector<double> gc;
  std::vector<double> gr;
};

struct RatioGrad {
  std::vector<double> d_gc;
  std::vector<double> d_gr;
};

/// sum_l A_l g_r(l) (k_l^2 g_c(l-1) + g_c(l)) / sum_l A_l k_l^2 C_in^l C_out^l,
/// with g_c(0) the input channel count.
double flop_ratio(const std::vector<model::UnitGeometry>& units, double input_channels,
                  const SoftCounts& counts, RatioGrad* grad = nullptr);

/// lambda (ratio - target)^2
double penalty(double ratio, const BudgetConfig& cfg);
double penalty_grad(double ratio, const BudgetConfig& cfg);

/// Inputs to the traced budget penalty for one iteration.
struct PenaltyInputs {
  const std::vector<model::UnitGeometry>* units = nullptr;
  double input_channels = 0.0;
  /// masks[u] is tracked for prunable units and ignored otherwise.
  std::vector<ad::Var> masks;
  std::vector<ad::Var> gammas;
  /// Spectrum each soft rank is measured on, and per-unit tau.
  std::vector<std::vector<double>> spectra;
  std::vector<double> tau;
  CountMode mode = CountMode::kSigmoid;
  double mu = 1.0;
};

struct PenaltyValue {
  ad::Var penalty;
  double ratio = 0.0;
  SoftCounts counts;
};

/// Records lambda (B(g_c, g_r) - B_d)^2 on the tape with gradients into the
/// masks and thresholds. The spectra are treated as constants.
PenaltyValue traced_penalty(const PenaltyInputs& in, const BudgetConfig& cfg);

}  // namespace dfc::budget
