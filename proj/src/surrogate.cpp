// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dfc::surrogate {

double SteepnessSchedule::mu(std::int64_t iteration) const {
  if (!enabled) return alpha;
  return std::min(alpha, mu0 + static_cast<double>(iteration) * beta);
}

std::int64_t SteepnessSchedule::saturation_iteration() const {
  if (!enabled || mu0 >= alpha) return 0;
  return static_cast<std::int64_t>(std::ceil((alpha - mu0) / beta));
}

void SteepnessSchedule::validate() const {
  if (!(mu0 > 0.0) || !(alpha >= mu0) || !(beta >= 0.0)) {
    throw std::invalid_argument("steepness schedule needs mu0 > 0, alpha >= mu0, beta >= 0");
  }
}

double scheduled_sigmoid(double x, double mu) { return 1.0 / (1.0 + std::exp(-mu * (x - 0.5))); }

Tensor scheduled_sigmoid(const Tensor& x, double mu) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i)
    y[i] = static_cast<float>(scheduled_sigmoid(x[i], mu));
  return y;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

linalg::MatricizationSpec spec_for(const ad::Var& w, linalg::Scheme scheme) {
  return linalg::MatricizationSpec{scheme, w.shape()};
}

}  // namespace

ad::Var apply_dml_s(const ad::Var& w, const ad::Var& m, double mu, linalg::Scheme scheme) {
  if (!(mu > 0.0)) throw std::invalid_argument("apply_dml_s: steepness must be positive");
  if (m.v().rank() != 1 || m.v().dim(0) != w.shape().at(0)) {
    throw std::invalid_argument("apply_dml_s: mask " + shape_str(m.shape()) + " does not match " +
                                std::to_string(w.shape().at(0)) + " filters");
  }
  const auto spec = spec_for(w, scheme);
  auto gate = ad::sigmoid(m, static_cast<float>(mu), 0.5f);
  auto scaled = ad::row_scale(ad::matricize(w, spec), gate, spec.rows_per_filter());
  return ad::dematricize(scaled, spec);
}

ad::Var apply_dtl_s(const ad::Var& w, const ad::Var& gamma, linalg::Scheme scheme,
                    const ad::SvtNodeOptions& options, std::vector<double>* spectrum) {
  if (gamma.v().numel() != 1 || !(gamma.v()[0] >= 0.0f)) {
    throw std::invalid_argument("apply_dtl_s: threshold must be a single non-negative value");
  }
  const auto spec = spec_for(w, scheme);
  return ad::dematricize(ad::svt(ad::matricize(w, spec), gamma, options, spectrum), spec);
}

ad::Var h_df(const ad::Var& w, const ad::Var* m, const ad::Var& gamma, double mu,
             linalg::Scheme scheme, const ad::SvtNodeOptions& options,
             std::vector<double>* spectrum) {
  const ad::Var masked = m ? apply_dml_s(w, *m, mu, scheme) : w;
  return apply_dtl_s(masked, gamma, scheme, options, spectrum);
}

}  // namespace dfc::surrogate
