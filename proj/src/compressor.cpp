// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/compressor.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

namespace dfc::compress {

ScheduleIndex parse_schedule_index(const std::string& text) {
  if (text == "global") return ScheduleIndex::kGlobal;
  if (text == "epoch") return ScheduleIndex::kPerEpoch;
  throw std::invalid_argument("unknown schedule index '" + text + "' (expected global or epoch)");
}

std::string to_string(ScheduleIndex s) { return s == ScheduleIndex::kGlobal ? "global" : "epoch"; }

void CompressConfig::validate() const {
  budget.validate();
  schedule.validate();
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (restart_cap < 0) throw std::invalid_argument("restart_cap must be >= 0");
  if (!(mask_lr >= 0.0) || !(threshold_lr_scale >= 0.0)) {
    throw std::invalid_argument("learning rates must be non-negative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
}

namespace {

linalg::MatricizationSpec unit_spec(const model::UnitGeometry& u, linalg::Scheme scheme) {
  return {scheme, u.weight_shape};
}

/// Matricized weight with filter gates on the rows and, when `in_mask` is
/// given, the preceding unit's gates on the columns of each input channel.
linalg::Matrix masked_matrix(const model::ModelGraph& m, const model::UnitGeometry& u,
                             const Tensor* mask, const Tensor* in_mask, double mu,
                             linalg::Scheme scheme) {
  const auto spec = unit_spec(u, scheme);
  auto x = linalg::matricize(m.layers[u.layer].w, spec);
  auto gate = [mu](float v) {
    return static_cast<double>(static_cast<float>(surrogate::scheduled_sigmoid(v, mu)));
  };
  if (mask) {
    const auto rpf = spec.rows_per_filter();
    for (std::int64_t r = 0; r < x.rows; ++r) {
      const double g = gate((*mask)[r / rpf]);
      for (std::int64_t c = 0; c < x.cols; ++c) x(r, c) *= g;
    }
  }
  if (in_mask) {
    const auto group = x.cols / u.c_in;
    std::vector<double> g(static_cast<std::size_t>(x.cols));
    for (std::int64_t c = 0; c < x.cols; ++c) g[c] = gate((*in_mask)[c / group]);
    for (std::int64_t r = 0; r < x.rows; ++r)
      for (std::int64_t c = 0; c < x.cols; ++c) x(r, c) *= g[c];
  }
  return x;
}

void check_model(const model::ModelGraph& m) {
  for (const auto& l : m.layers) {
    for (const Tensor* t : {&l.w, &l.bias}) {
      if (!t->all_finite()) throw std::invalid_argument("model weights contain non-finite values");
    }
  }
}

}  // namespace

SelectionState initial_state(const model::ModelGraph& m, const CompressConfig& cfg) {
  const auto units = m.units();
  SelectionState s;
  s.scheme = cfg.scheme;
  s.mu = cfg.schedule.mu(0);
  for (const auto& u : units) {
    s.masks.push_back(u.prunable ? Tensor({u.c_out}, 1.0f) : Tensor());
    s.gammas.push_back(0.0);
    auto f = linalg::thin_svd(masked_matrix(m, u, nullptr, nullptr, 1.0, cfg.scheme));
    if (f.singular_values.empty() || !(f.singular_values[0] > 0.0)) {
      throw std::invalid_argument("layer " + std::to_string(u.layer) + " has an all-zero weight");
    }
    s.tau.push_back(cfg.budget.tau_c / f.singular_values[0]);
    s.original_spectra.push_back(f.singular_values);
  }
  s.spectra = s.original_spectra;
  return s;
}

std::vector<std::vector<double>> budget_spectra(const model::ModelGraph& m,
                                                const SelectionState& state, double mu) {
  const auto units = m.units();
  std::vector<std::vector<double>> out;
  for (std::size_t u = 0; u < units.size(); ++u) {
    const Tensor* mask = units[u].prunable ? &state.masks[u] : nullptr;
    const Tensor* in_mask = u > 0 && units[u - 1].prunable ? &state.masks[u - 1] : nullptr;
    out.push_back(linalg::svd_values(masked_matrix(m, units[u], mask, in_mask, mu, state.scheme)));
  }
  return out;
}

double soft_ratio(const model::ModelGraph& m, SelectionState& state, const CompressConfig& cfg,
                  double mu) {
  const auto units = m.units();
  budget::SoftCounts counts;
  state.spectra = budget_spectra(m, state, mu);
  for (std::size_t u = 0; u < units.size(); ++u) {
    const Tensor* mask = units[u].prunable ? &state.masks[u] : nullptr;
    if (mask) {
      std::vector<double> mv(mask->data().begin(), mask->data().end());
      counts.gc.push_back(budget::soft_filter_count(mv, cfg.count_mode, mu));
    } else {
      counts.gc.push_back(static_cast<double>(units[u].c_out));
    }
    counts.gr.push_back(budget::soft_rank(state.spectra[u], state.gammas[u], state.tau[u]));
  }
  return budget::flop_ratio(units, static_cast<double>(m.input.channels), counts);
}

std::vector<double> gate_values(const SelectionState& state, double mu) {
  std::vector<double> out;
  for (const auto& mask : state.masks)
    for (float v : mask.data()) out.push_back(surrogate::scheduled_sigmoid(v, mu));
  return out;
}

CompressResult compress(const model::ModelGraph& m, const io::Dataset& train,
                        const CompressConfig& cfg, const IterationCallback& on_iteration) {
  cfg.validate();
  check_model(m);
  if (train.size() == 0) throw std::invalid_argument("compress: training set is empty");
  const auto units = m.units();
  const auto n_units = units.size();

  CompressResult res;
  SelectionState& state = res.state;
  state = initial_state(m, cfg);
  double b_cal = soft_ratio(m, state, cfg, cfg.schedule.mu(0));
  const double target = cfg.budget.target;

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::int64_t> order(static_cast<std::size_t>(train.size()));
  std::iota(order.begin(), order.end(), std::int64_t{0});

  std::vector<std::vector<double>> mask_vel(n_units);
  for (std::size_t u = 0; u < n_units; ++u) mask_vel[u].assign(state.masks[u].numel(), 0.0);
  std::vector<double> gamma_vel(n_units, 0.0);

  ad::SvtNodeOptions svt_opts;
  svt_opts.vjp.mode = cfg.svd_grad;

  SelectionState best = state;
  double best_gap = std::abs(b_cal - target);
  double best_ratio = b_cal;

  Tensor x;
  std::vector<int> y;
  double last_mu = cfg.schedule.mu(0);
  while (std::abs(b_cal - target) >= cfg.epsilon) {
    if (res.passes > cfg.restart_cap) {
      res.status = RunStatus::kRestartCapReached;
      break;
    }
    for (int ep = 0; ep < cfg.epochs; ++ep) {
      std::shuffle(order.begin(), order.end(), rng);
      std::int64_t in_epoch = 0;
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++in_epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto len = std::min<std::size_t>(cfg.batch_size, order.size() - start);
        train.gather(std::span(order).subspan(start, len), x, y);

        const double mu = cfg.schedule.mu(
            cfg.schedule_index == ScheduleIndex::kGlobal ? state.iteration : in_epoch);
        ad::Tape tape;
        auto bound = model::bind(tape, m, false);
        std::vector<ad::Var> mvars(n_units), gvars(n_units);
        std::map<std::size_t, ad::Var> overrides;
        for (std::size_t u = 0; u < n_units; ++u) {
          if (units[u].prunable) mvars[u] = tape.parameter(state.masks[u]);
          gvars[u] = tape.parameter(Tensor({1}, static_cast<float>(state.gammas[u])));
          overrides[units[u].layer] =
              surrogate::h_df(bound[units[u].layer].w, units[u].prunable ? &mvars[u] : nullptr,
                              gvars[u], mu, cfg.scheme, svt_opts);
        }
        state.spectra = budget_spectra(m, state, mu);
        auto logits = model::forward(m, bound, tape.constant(x), overrides);
        auto ce = ad::softmax_cross_entropy(logits, y);
        budget::PenaltyInputs pin;
        pin.units = &units;
        pin.input_channels = static_cast<double>(m.input.channels);
        pin.masks = mvars;
        pin.gammas = gvars;
        pin.spectra = state.spectra;
        pin.tau = state.tau;
        pin.mode = cfg.count_mode;
        pin.mu = mu;
        auto pv = budget::traced_penalty(pin, cfg.budget);
        auto loss = ad::add(ce, pv.penalty);
        const double ce_value = ce.v()[0];
        if (!std::isfinite(ce_value) || !std::isfinite(pv.ratio)) {
          throw DivergenceError("compress: non-finite loss at iteration " +
                                    std::to_string(state.iteration),
                                state);
        }
        auto grads = tape.backward(loss);

        SelectionState last_good = state;
        for (std::size_t u = 0; u < n_units; ++u) {
          if (units[u].prunable && grads.has(mvars[u])) {
            const Tensor& g = grads.of(mvars[u]);
            for (std::size_t j = 0; j < g.numel(); ++j) {
              mask_vel[u][j] = cfg.momentum * mask_vel[u][j] + g[j];
              state.masks[u][j] -= static_cast<float>(cfg.mask_lr * mask_vel[u][j]);
            }
          }
          if (grads.has(gvars[u])) {
            const double s1 = state.original_spectra[u][0];
            gamma_vel[u] = cfg.momentum * gamma_vel[u] + grads.of(gvars[u])[0];
            const double next = state.gammas[u] - cfg.threshold_lr_scale * s1 * gamma_vel[u];
            state.gammas[u] = std::clamp(next, 0.0, s1);
          }
        }
        for (std::size_t u = 0; u < n_units; ++u) {
          if (!state.masks[u].all_finite() || !std::isfinite(state.gammas[u])) {
            throw DivergenceError("compress: non-finite parameter update at iteration " +
                                      std::to_string(state.iteration),
                                  std::move(last_good));
          }
        }

        IterationRecord rec;
        rec.iteration = state.iteration;
        rec.loss = ce_value;
        rec.penalty = budget::penalty(pv.ratio, cfg.budget);
        rec.flop_ratio = pv.ratio;
        rec.mu = mu;
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        res.log.push_back(rec);
        if (on_iteration) on_iteration(rec);
        state.mu = mu;
        last_mu = mu;
        ++state.iteration;
      }
    }
    ++res.passes;
    b_cal = soft_ratio(m, state, cfg, last_mu);
    const double gap = std::abs(b_cal - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = state;
      best_ratio = b_cal;
    }
  }
  if (res.status == RunStatus::kRestartCapReached) {
    res.warnings.push_back("restart cap reached with |B_cal - B_d| = " +
                           std::to_string(std::abs(b_cal - target)) +
                           "; returning the closest state");
    // Keep the schedule position of the final iteration.
    const auto it = state.iteration;
    const auto mu = state.mu;
    state = best;
    state.iteration = it;
    state.mu = mu;
    b_cal = best_ratio;
  }
  res.soft_ratio = b_cal;
  return res;
}

EvalResult evaluate(const model::ModelGraph& m, const io::Dataset& data, int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("evaluate: batch_size must be >= 1");
  EvalResult r;
  const auto k = m.input.classes;
  r.confusion.assign(k, std::vector<std::int64_t>(k, 0));
  std::vector<std::int64_t> idx;
  Tensor x;
  std::vector<int> y;
  for (std::int64_t start = 0; start < data.size(); start += batch_size) {
    const auto len = std::min<std::int64_t>(batch_size, data.size() - start);
    idx.resize(len);
    std::iota(idx.begin(), idx.end(), start);
    data.gather(idx, x, y);
    const Tensor logits = model::forward(m, x);
    for (std::int64_t i = 0; i < len; ++i) {
      const float* row = logits.ptr() + i * k;
      std::int64_t best = 0;
      for (std::int64_t j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
      if (y[i] < 0 || y[i] >= k) throw std::invalid_argument("evaluate: label out of range");
      r.confusion[y[i]][best] += 1;
      if (best == y[i]) ++r.correct;
    }
    r.total += len;
  }
  r.accuracy = r.total == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

namespace {

void augment(Tensor& x, bool flip, bool crop, std::mt19937_64& rng) {
  const auto n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  std::uniform_int_distribution<int> coin(0, 1), shift(-1, 1);
  std::vector<float> plane(static_cast<std::size_t>(h * w));
  for (std::int64_t i = 0; i < n; ++i) {
    const bool do_flip = flip && coin(rng) == 1;
    const int dy = crop ? shift(rng) : 0, dx = crop ? shift(rng) : 0;
    if (!do_flip && dy == 0 && dx == 0) continue;
    for (std::int64_t ch = 0; ch < c; ++ch) {
      float* p = x.ptr() + (i * c + ch) * h * w;
      std::copy_n(p, h * w, plane.begin());
      for (std::int64_t r = 0; r < h; ++r)
        for (std::int64_t col = 0; col < w; ++col) {
          const std::int64_t sr = r + dy;
          std::int64_t sc = col + dx;
          if (do_flip) sc = w - 1 - sc;
          p[r * w + col] = (sr >= 0 && sr < h && sc >= 0 && sc < w) ? plane[sr * w + sc] : 0.0f;
        }
    }
  }
}

}  // namespace

TrainResult train(const model::ModelGraph& m, const io::Dataset& train_set,
                  const io::Dataset* val_set, const TrainConfig& cfg) {
  if (cfg.epochs < 0 || cfg.batch_size < 1 || !(cfg.lr >= 0.0)) {
    throw std::invalid_argument("train: need epochs >= 0, batch_size >= 1, lr >= 0");
  }
  TrainResult res;
  res.model = m;
  model::ModelGraph& cur = res.model;
  auto params = model::parameter_tensors(cur);
  std::vector<std::vector<float>> vel;
  for (auto* p : params) vel.emplace_back(p->numel(), 0.0f);
  model::ModelGraph best = cur;
  double best_acc = -1.0;
  if (val_set) {
    best_acc = evaluate(cur, *val_set).accuracy;
    res.val_accuracy.push_back(best_acc);
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::int64_t> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), std::int64_t{0});
  Tensor x;
  std::vector<int> y;
  for (int ep = 1; ep <= cfg.epochs; ++ep) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::int64_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto len = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      train_set.gather(std::span(order).subspan(start, len), x, y);
      if (cfg.augment_flip || cfg.augment_crop) augment(x, cfg.augment_flip, cfg.augment_crop, rng);
      ad::Tape tape;
      auto bound = model::bind(tape, cur, true);
      auto vars = model::parameter_vars(cur, bound);
      auto loss = ad::softmax_cross_entropy(model::forward(cur, bound, tape.constant(x)), y);
      const double lv = loss.v()[0];
      if (!std::isfinite(lv)) {
        throw std::runtime_error("train: non-finite loss in epoch " + std::to_string(ep) +
                                 " after " + std::to_string(batches) + " batches");
      }
      auto grads = tape.backward(loss);
      for (std::size_t k = 0; k < params.size(); ++k) {
        if (!grads.has(vars[k])) continue;
        const Tensor& g = grads.of(vars[k]);
        Tensor& p = *params[k];
        for (std::size_t j = 0; j < p.numel(); ++j) {
          const float gj = g[j] + static_cast<float>(cfg.weight_decay) * p[j];
          vel[k][j] = static_cast<float>(cfg.momentum) * vel[k][j] + gj;
          p[j] -= static_cast<float>(cfg.lr) * vel[k][j];
        }
      }
      loss_sum += lv;
      ++batches;
    }
    res.train_loss.push_back(batches ? loss_sum / batches : 0.0);
    if (val_set) {
      const double acc = evaluate(cur, *val_set).accuracy;
      res.val_accuracy.push_back(acc);
      if (acc > best_acc) {
        best_acc = acc;
        best = cur;
        res.best_epoch = ep;
      }
    }
  }
  if (val_set) {
    res.model = std::move(best);
  } else {
    res.best_epoch = cfg.epochs;
  }
  return res;
}

}  // namespace dfc::compress
