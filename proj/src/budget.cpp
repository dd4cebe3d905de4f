// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/budget.hpp"

#include <cmath>
#include <stdexcept>

#include "dfc/surrogate.hpp"

namespace dfc::budget {

CountMode parse_count_mode(const std::string& text) {
  if (text == "sigmoid") return CountMode::kSigmoid;
  if (text == "scheduled") return CountMode::kScheduled;
  throw std::invalid_argument("unknown count mode '" + text + "' (expected sigmoid|scheduled)");
}

std::string to_string(CountMode m) { return m == CountMode::kSigmoid ? "sigmoid" : "scheduled"; }

void BudgetConfig::validate() const {
  if (!(target > 0.0 && target <= 1.0)) {
    throw std::invalid_argument("budget target must lie in (0, 1], got " + std::to_string(target));
  }
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(tau_c > 0.0)) throw std::invalid_argument("tau_c must be positive");
}

double soft_filter_count(const std::vector<double>& m, CountMode mode, double mu,
                         std::vector<double>* grad) {
  double total = 0.0;
  if (grad) grad->assign(m.size(), 0.0);
  for (std::size_t j = 0; j < m.size(); ++j) {
    double y, dy;
    if (mode == CountMode::kSigmoid) {
      y = surrogate::sigmoid(m[j]);
      dy = y * (1.0 - y);
    } else {
      y = surrogate::scheduled_sigmoid(m[j], mu);
      dy = mu * y * (1.0 - y);
    }
    total += y;
    if (grad) (*grad)[j] = dy;
  }
  return total;
}

double soft_rank(const std::vector<double>& sigma, double gamma, double tau, double* dgamma) {
  double total = 0.0, d = 0.0;
  for (double s : sigma) {
    const double gap = s - gamma;
    if (gap <= 0.0) continue;
    const double t = std::tanh(gap * tau);
    total += t;
    d -= tau * (1.0 - t * t);
  }
  if (dgamma) *dgamma = d;
  return total;
}

double flop_ratio(const std::vector<model::UnitGeometry>& units, double input_channels,
                  const SoftCounts& counts, RatioGrad* grad) {
  const auto n = units.size();
  if (counts.gc.size() != n || counts.gr.size() != n) {
    throw std::invalid_argument("flop_ratio: counts cover " + std::to_string(counts.gc.size()) +
                                " units, model has " + std::to_string(n));
  }
  double num = 0.0, den = 0.0;
  if (grad) {
    grad->d_gc.assign(n, 0.0);
    grad->d_gr.assign(n, 0.0);
  }
  for (std::size_t u = 0; u < n; ++u) {
    const auto& g = units[u];
    const double a = static_cast<double>(g.out_area);
    const double k2 = static_cast<double>(g.kernel_area);
    const double prev = u == 0 ? input_channels : counts.gc[u - 1];
    num += a * counts.gr[u] * (k2 * prev + counts.gc[u]);
    den += static_cast<double>(g.dense_flops());
    if (grad) {
      grad->d_gr[u] += a * (k2 * prev + counts.gc[u]);
      grad->d_gc[u] += a * counts.gr[u];
      if (u > 0) grad->d_gc[u - 1] += a * counts.gr[u] * k2;
    }
  }
  if (den <= 0.0) throw std::invalid_argument("flop_ratio: model has no dense FLOPs");
  if (grad) {
    for (auto& v : grad->d_gc) v /= den;
    for (auto& v : grad->d_gr) v /= den;
  }
  return num / den;
}

double penalty(double ratio, const BudgetConfig& cfg) {
  const double d = ratio - cfg.target;
  return cfg.lambda * d * d;
}

double penalty_grad(double ratio, const BudgetConfig& cfg) {
  return 2.0 * cfg.lambda * (ratio - cfg.target);
}

PenaltyValue traced_penalty(const PenaltyInputs& in, const BudgetConfig& cfg) {
  const auto& units = *in.units;
  const auto n = units.size();
  if (in.masks.size() != n || in.gammas.size() != n || in.spectra.size() != n ||
      in.tau.size() != n) {
    throw std::invalid_argument("traced_penalty: inputs do not cover every unit");
  }
  PenaltyValue out;
  out.counts.gc.resize(n);
  out.counts.gr.resize(n);
  auto mask_grads = std::make_shared<std::vector<std::vector<double>>>(n);
  auto gamma_grads = std::make_shared<std::vector<double>>(n, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    if (units[u].prunable) {
      const Tensor& mt = in.masks[u].v();
      std::vector<double> m(mt.data().begin(), mt.data().end());
      out.counts.gc[u] = soft_filter_count(m, in.mode, in.mu, &(*mask_grads)[u]);
    } else {
      out.counts.gc[u] = static_cast<double>(units[u].c_out);
    }
    out.counts.gr[u] =
        soft_rank(in.spectra[u], in.gammas[u].v()[0], in.tau[u], &(*gamma_grads)[u]);
  }
  RatioGrad rg;
  out.ratio = flop_ratio(units, in.input_channels, out.counts, &rg);
  const double dp = penalty_grad(out.ratio, cfg);

  std::vector<ad::Var> inputs;
  std::vector<std::size_t> owner;  // unit index per input; masks first
  std::vector<bool> is_mask;
  ad::Tape* tape = nullptr;
  for (std::size_t u = 0; u < n; ++u) {
    if (units[u].prunable) {
      inputs.push_back(in.masks[u]);
      owner.push_back(u);
      is_mask.push_back(true);
    }
    inputs.push_back(in.gammas[u]);
    owner.push_back(u);
    is_mask.push_back(false);
  }
  for (const auto& v : inputs)
    if (v.tape) tape = v.tape;
  Tensor value = Tensor::scalar(static_cast<float>(penalty(out.ratio, cfg)));
  if (!tape) {
    out.penalty = ad::Var{nullptr, std::make_shared<const Tensor>(std::move(value)), -1};
    return out;
  }
  std::vector<Shape> shapes;
  for (const auto& v : inputs) shapes.push_back(v.shape());
  out.penalty = tape->record(
      std::move(value), inputs,
      [=](const Tensor& g, const std::vector<bool>& needs) {
        std::vector<Tensor> r(needs.size());
        const double up = g[0] * dp;
        for (std::size_t k = 0; k < needs.size(); ++k) {
          if (!needs[k]) continue;
          const auto u = owner[k];
          r[k] = Tensor(shapes[k]);
          if (is_mask[k]) {
            const auto& dm = (*mask_grads)[u];
            for (std::size_t j = 0; j < dm.size(); ++j)
              r[k][j] = static_cast<float>(up * rg.d_gc[u] * dm[j]);
          } else {
            r[k][0] = static_cast<float>(up * rg.d_gr[u] * (*gamma_grads)[u]);
          }
        }
        return r;
      });
  return out;
}

}  // namespace dfc::budget
