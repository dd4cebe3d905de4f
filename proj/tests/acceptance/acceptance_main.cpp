// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when a gating criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dfc/budget.hpp"
#include "dfc/compressor.hpp"
#include "dfc/config.hpp"
#include "dfc/io.hpp"
#include "dfc/linalg.hpp"
#include "dfc/model.hpp"
#include "dfc/realizer.hpp"
#include "unit/corrupt.hpp"
#include "unit/hdf_oracle.hpp"

namespace fs = std::filesystem;
using namespace dfc;

namespace {

constexpr const char* kArch = "c32-p2-c64-c80-p2-c128";
constexpr int kBaselineEpochs = 40;
constexpr double kBaselineLr = 0.01;
constexpr int kFinetuneEpochs = 100;
constexpr double kFinetuneLr = 0.001;
constexpr int kCompressEpochs = 2;
constexpr std::int64_t kTrain = 2000, kVal = 500, kTest = 500;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

void progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

Eigen::MatrixXd to_eigen(const linalg::Matrix& x) {
  Eigen::MatrixXd e(x.rows, x.cols);
  for (std::int64_t i = 0; i < x.rows; ++i)
    for (std::int64_t j = 0; j < x.cols; ++j) e(i, j) = x(i, j);
  return e;
}

// ---------------------------------------------------------------------------
// 1. SVT against a brute-force SVD-shrink-remultiply oracle.

Outcome svt_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(101);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  int rank_mismatch = 0, cases = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::int64_t rows = 1 + rng() % 32, cols = 1 + rng() % 64;
    linalg::Matrix x(rows, cols);
    if (trial % 4 == 3) {
      // Low-rank product, exercising zero singular values.
      const std::int64_t k = 1 + rng() % std::min(rows, cols);
      Eigen::MatrixXd a(rows, k), b(k, cols);
      for (auto& v : a.reshaped()) v = nd(rng);
      for (auto& v : b.reshaped()) v = nd(rng);
      const Eigen::MatrixXd p = a * b;
      for (std::int64_t i = 0; i < rows; ++i)
        for (std::int64_t j = 0; j < cols; ++j) x(i, j) = p(i, j);
    } else {
      for (auto& v : x.data) v = nd(rng);
    }
    const Eigen::MatrixXd e = to_eigen(x);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(e, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd s = svd.singularValues();
    std::vector<double> sorted(s.data(), s.data() + s.size());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    for (double gamma : {0.0, median, s(0) + 0.1}) {
      Eigen::VectorXd shrunk = s;
      std::int64_t expect_rank = 0;
      for (Eigen::Index k = 0; k < s.size(); ++k) {
        shrunk(k) = std::max(s(k) - gamma, 0.0);
        // Singular values at round-off level do not count as surviving.
        if (s(k) > gamma && s(k) > linalg::kRankTolerance * s(0)) ++expect_rank;
      }
      const Eigen::MatrixXd oracle = svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
      const auto y = linalg::svt(x, gamma);
      worst = std::max(worst, (to_eigen(y) - oracle).cwiseAbs().maxCoeff());
      if (linalg::numerical_rank(y) != expect_rank) ++rank_mismatch;
      ++cases;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-6 && rank_mismatch == 0 && secs < 10.0;
  o.detail = std::to_string(cases) + " cases on 200 matrices, max-abs " + fmt(worst, 3) +
             " (<= 1e-6), rank mismatches " + std::to_string(rank_mismatch) + ", " +
             fmt(secs, 3) + " s (< 10 s)";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Surrogate gradients against central differences of a double oracle.

Outcome gradient_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(202);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  int probes = 0, failed = 0, skipped = 0;
  double worst = 0.0;
  const double mus[] = {5.0, 9.0, 13.0};
  while (probes < 50) {
    const std::int64_t o = 2 + rng() % 5, i = 1 + rng() % 4, k = rng() % 2 ? 3 : 1;
    const auto scheme = rng() % 2 ? linalg::Scheme::kFilterWise : linalg::Scheme::kSpatialSeparable;
    auto p = testing::random_hdf_problem(rng, o, i, k, scheme, mus[rng() % 3]);
    std::vector<double> m(o);
    for (auto& v : m) v = static_cast<float>(0.5 + 0.5 * unit(rng));
    const auto s = p.spectrum(m);
    if (s.size() < 2) {
      ++skipped;
      continue;
    }
    const auto at = static_cast<Eigen::Index>(rng() % (s.size() - 1));
    const double gamma = static_cast<float>(0.5 * (s(at) + s(at + 1)));
    if (!testing::well_separated(s, gamma, 1e-3)) {
      ++skipped;
      continue;
    }
    const auto g = testing::tape_gradient(p, m, gamma);
    // dLoss/dgamma on its own, then dLoss/dm along a random direction.
    const std::vector<double> zero(o, 0.0);
    const auto rg = testing::probe_hdf(p, m, gamma, g, zero, 1.0, 1e-3);
    std::vector<double> dm(o);
    for (auto& v : dm) v = unit(rng);
    const auto rm = testing::probe_hdf(p, m, gamma, g, dm, 0.0, 1e-3);
    const double rel = std::max(rg.rel(), rm.rel());
    worst = std::max(worst, rel);
    if (rel > 1e-3) ++failed;
    ++probes;
  }
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = failed == 0 && secs < 60.0;
  out.detail = "50 probes (" + std::to_string(skipped) +
               " draws skipped for spectrum separation), worst rel. error " + fmt(worst, 3) +
               " (<= 1e-3), " + std::to_string(failed) + " failed, " + fmt(secs, 3) +
               " s (< 60 s)";
  return out;
}

// ---------------------------------------------------------------------------
// 3. Soft ratio at rounded counts against the integer FLOP count.

Outcome budget_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  auto m = model::build_model("c8-c12-p2-c16-c16-p2-c24", {3, 8, 8, 10});
  model::init_weights(m, 0);
  const auto units = m.units();
  std::mt19937 rng(303);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<bool>> masks;
    std::vector<std::optional<std::int64_t>> ranks;
    budget::SoftCounts c;
    std::int64_t prev = m.input.channels;
    for (const auto& u : units) {
      std::vector<bool> keep(u.c_out);
      std::int64_t kept = 0;
      for (std::size_t j = 0; j < keep.size(); ++j) {
        keep[j] = !u.prunable || rng() % 4 != 0;
        kept += keep[j];
      }
      const std::int64_t bound = std::min(kept, u.kernel_area * prev);
      const auto r = bound == 0 ? 0 : static_cast<std::int64_t>(rng() % (bound + 1));
      masks.push_back(keep);
      ranks.emplace_back(r);
      c.gc.push_back(static_cast<double>(kept));
      c.gr.push_back(static_cast<double>(r));
      prev = kept;
    }
    const auto hard = model::hard_flops(m, masks, ranks);
    const double soft = budget::flop_ratio(units, static_cast<double>(m.input.channels), c);
    const double rel = hard.ratio() == 0.0 ? std::abs(soft) : std::abs(soft - hard.ratio()) / hard.ratio();
    worst = std::max(worst, rel);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-9 && secs < 5.0;
  o.detail = "100 assignments on a " + std::to_string(units.size()) +
             "-layer CNN, worst rel. difference " + fmt(worst, 3) + " (<= 1e-9), " +
             fmt(secs, 3) + " s (< 5 s)";
  return o;
}

// ---------------------------------------------------------------------------
// 4. Eckart-Young error of realized factors and composed-conv equivalence.

Tensor random_input(const Shape& shape, std::mt19937& rng) {
  Tensor t(shape);
  std::uniform_real_distribution<float> d(-1.f, 1.f);
  for (auto& v : t.storage()) v = d(rng);
  return t;
}

/// Dense matricized weight rebuilt from a factorized layer.
linalg::Matrix compose_factors(const model::Layer& l, const linalg::MatricizationSpec& spec) {
  const auto r = l.rank;
  linalg::Matrix w2m(spec.rows(), r), w1m(r, spec.cols());
  for (std::int64_t k = 0; k < r; ++k)
    for (std::int64_t j = 0; j < spec.cols(); ++j) w1m(k, j) = l.w1[k * spec.cols() + j];
  if (l.kind == model::LayerKind::kLinear || l.scheme == linalg::Scheme::kFilterWise) {
    for (std::int64_t i = 0; i < spec.rows(); ++i)
      for (std::int64_t k = 0; k < r; ++k) w2m(i, k) = l.w2[i * r + k];
  } else {
    const auto kw = l.kw;
    for (std::int64_t o = 0; o < l.c_out; ++o)
      for (std::int64_t x = 0; x < kw; ++x)
        for (std::int64_t k = 0; k < r; ++k) w2m(o * kw + x, k) = l.w2[(o * r + k) * kw + x];
  }
  return linalg::matmul(w2m, w1m);
}

Outcome eckart_young() {
  auto m = model::build_model("c8-c12-p2-c16-f24", {3, 8, 8, 10});
  model::init_weights(m, 404);
  std::mt19937 rng(404);
  double worst_rel = 0.0, worst_full = 0.0, worst_fwd = 0.0;
  int ranks_checked = 0;
  for (const auto scheme : {linalg::Scheme::kFilterWise, linalg::Scheme::kSpatialSeparable}) {
    for (const auto& u : m.units()) {
      const auto& w = m.layers[u.layer].w;
      linalg::MatricizationSpec spec{scheme, w.shape()};
      const auto x = linalg::matricize(w, spec);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(x), Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Eigen::VectorXd s = svd.singularValues();
      const std::int64_t full = std::min(spec.rows(), spec.cols());
      for (std::int64_t r = 1; r <= full; ++r) {
        model::ModelGraph f = m;
        realize::factorize_layer(f, u.layer, r, scheme);
        const auto approx = compose_factors(f.layers[u.layer], spec);
        double err2 = 0.0;
        for (std::size_t i = 0; i < x.data.size(); ++i)
          err2 += (x.data[i] - approx.data[i]) * (x.data[i] - approx.data[i]);
        double tail2 = 0.0;
        for (Eigen::Index k = r; k < s.size(); ++k) tail2 += s(k) * s(k);
        const double err = std::sqrt(err2), tail = std::sqrt(tail2);
        if (r < full) {
          worst_rel = std::max(worst_rel, std::abs(err - tail) / tail);
        } else {
          // Zero truncation error: only float storage of the factors remains.
          worst_full = std::max(worst_full, err / s(0));
        }
        ++ranks_checked;
        // Composed layer against the dense layer holding the truncated weight.
        if (r == 1 || r == full / 2 || r == full) {
          Eigen::VectorXd kept = s;
          for (Eigen::Index k = r; k < kept.size(); ++k) kept(k) = 0.0;
          const Eigen::MatrixXd tw = svd.matrixU() * kept.asDiagonal() * svd.matrixV().transpose();
          linalg::Matrix tm(spec.rows(), spec.cols());
          for (std::int64_t i = 0; i < tm.rows; ++i)
            for (std::int64_t j = 0; j < tm.cols; ++j) tm(i, j) = tw(i, j);
          model::ModelGraph t = m;
          t.layers[u.layer].w = linalg::dematricize(tm, spec);
          for (int b = 0; b < 3; ++b) {
            const auto in = random_input({4, 3, 8, 8}, rng);
            worst_fwd = std::max(worst_fwd, max_abs_diff(model::forward(f, in), model::forward(t, in)));
          }
        }
      }
    }
  }
  Outcome o;
  o.pass = worst_rel <= 1e-4 && worst_full <= 1e-5 && worst_fwd <= 1e-4;
  o.detail = std::to_string(ranks_checked) + " (layer, scheme, rank) cases, worst rel. error " +
             fmt(worst_rel, 3) + " (<= 1e-4), full-rank residual " + fmt(worst_full, 3) +
             " sigma_1, composed output max-abs " + fmt(worst_fwd, 3) + " (<= 1e-4)";
  return o;
}

// ---------------------------------------------------------------------------
// 5-7. End-to-end runs on synthetic data.

std::string profile_path;

config::RunConfig toy_profile() {
  return config::load(profile_path);
}

struct SeedData {
  io::Dataset train, val, test;
};

SeedData make_data(std::uint64_t seed) {
  io::SynthSpec spec;
  spec.count = kTrain + kVal + kTest;
  const auto parts = io::split(io::synth_dataset(seed, spec).data, {kTrain, kVal, kTest});
  return {io::decode(parts[0]), io::decode(parts[1]), io::decode(parts[2])};
}

struct Baseline {
  model::ModelGraph model;
  double test_accuracy = 0.0;
};

Baseline train_baseline(const SeedData& d, std::uint64_t seed, int epochs = kBaselineEpochs) {
  auto cfg = toy_profile();
  cfg.seed = seed;
  auto m = model::build_model(kArch, {d.train.channels, d.train.height, d.train.width,
                                      d.train.classes});
  model::init_weights(m, seed);
  auto t = cfg.train_config(epochs, kBaselineLr);
  t.epochs = epochs;
  auto r = compress::train(m, d.train, &d.val, t);
  Baseline b{std::move(r.model), 0.0};
  b.test_accuracy = compress::evaluate(b.model, d.test).accuracy;
  return b;
}

struct RunOutcome {
  double soft_ratio = 0.0;
  double hard_ratio = 0.0;
  double saturated = 0.0;
  bool frozen_ok = false;
  int passes = 0;
  model::ModelGraph realized;
  std::optional<double> finetuned_accuracy;
};

RunOutcome run_budget(const Baseline& base, const SeedData& d, std::uint64_t seed, double budget,
                      bool schedule_on, bool finetune) {
  auto cfg = toy_profile();
  cfg.seed = seed;
  cfg.budget = budget;
  cfg.schedule_on = schedule_on;
  const auto ccfg = cfg.compress_config(kCompressEpochs);
  const auto hash = io::weight_hash(base.model);
  const auto res = compress::compress(base.model, d.train, ccfg);
  RunOutcome out;
  out.frozen_ok = io::weight_hash(base.model) == hash;
  out.soft_ratio = res.soft_ratio;
  out.passes = res.passes;
  const auto gates = compress::gate_values(res.state, res.state.mu);
  std::int64_t sat = 0;
  for (double g : gates) sat += (g <= 1e-3 || g >= 1.0 - 1e-3) ? 1 : 0;
  out.saturated = gates.empty() ? 1.0 : static_cast<double>(sat) / gates.size();
  realize::RealizeOptions opts;
  opts.shrink = cfg.shrink;
  auto rz = realize::realize(base.model, res.state, opts);
  out.hard_ratio = rz.flop_ratio();
  out.realized = std::move(rz.model);
  if (finetune) {
    const auto t = cfg.train_config(kFinetuneEpochs, kFinetuneLr);
    const auto ft = compress::train(out.realized, d.train, &d.val, t);
    out.finetuned_accuracy = compress::evaluate(ft.model, d.test).accuracy;
  }
  return out;
}

/// Shared state of criteria 5-7 so each model is trained once.
struct EndToEnd {
  std::map<std::uint64_t, SeedData> data;
  std::map<std::uint64_t, Baseline> baselines;
  std::map<std::tuple<std::uint64_t, double, bool>, RunOutcome> runs;

  const SeedData& seed_data(std::uint64_t s) {
    if (!data.count(s)) data.emplace(s, make_data(s));
    return data.at(s);
  }
  const Baseline& baseline(std::uint64_t s) {
    if (!baselines.count(s)) {
      const auto t0 = std::chrono::steady_clock::now();
      baselines.emplace(s, train_baseline(seed_data(s), s));
      progress("seed " + std::to_string(s) + " baseline test accuracy " +
               fmt(baselines.at(s).test_accuracy) + " (" + fmt(seconds_since(t0), 3) + " s)");
    }
    return baselines.at(s);
  }
  const RunOutcome& run(std::uint64_t s, double budget, bool schedule_on, bool finetune) {
    const auto key = std::make_tuple(s, budget, schedule_on);
    auto it = runs.find(key);
    if (it != runs.end() && (!finetune || it->second.finetuned_accuracy)) return it->second;
    const auto t0 = std::chrono::steady_clock::now();
    const auto& b = baseline(s);
    auto r = run_budget(b, seed_data(s), s, budget, schedule_on, finetune);
    std::string msg = "seed " + std::to_string(s) + " B_d " + fmt(budget) + " schedule " +
                      (schedule_on ? "on" : "off") + ": soft " + fmt(r.soft_ratio) + " hard " +
                      fmt(r.hard_ratio) + " saturated " + fmt(r.saturated) + " passes " +
                      std::to_string(r.passes);
    if (r.finetuned_accuracy) msg += " finetuned " + fmt(*r.finetuned_accuracy);
    progress(msg + " (" + fmt(seconds_since(t0), 3) + " s)");
    runs[key] = std::move(r);
    return runs.at(key);
  }
};

Outcome budget_hit(EndToEnd& e2e) {
  const auto t0 = std::chrono::steady_clock::now();
  int ok = 0, total = 0;
  std::ostringstream os;
  double worst_soft = 0.0, worst_hard = 0.0, min_sat = 1.0, worst_secs = 0.0;
  for (double budget : {0.7, 0.5}) {
    for (std::uint64_t s : {0u, 1u, 2u}) {
      e2e.baseline(s);
      const auto t1 = std::chrono::steady_clock::now();
      const auto& r = e2e.run(s, budget, true, budget == 0.5);
      worst_secs = std::max(worst_secs, seconds_since(t1));
      const double ds = std::abs(r.soft_ratio - budget), dh = std::abs(r.hard_ratio - budget);
      worst_soft = std::max(worst_soft, ds);
      worst_hard = std::max(worst_hard, dh);
      min_sat = std::min(min_sat, r.saturated);
      const bool pass = ds <= 0.02 && dh <= 0.05 && r.saturated >= 0.99 && r.frozen_ok;
      ok += pass;
      ++total;
      if (!pass) {
        os << " [seed " << s << " B_d " << budget << " failed: soft " << fmt(r.soft_ratio)
           << " hard " << fmt(r.hard_ratio) << " saturated " << fmt(r.saturated) << "]";
      }
    }
  }
  Outcome o;
  o.pass = ok == total && worst_secs < 1800.0;
  o.detail = std::to_string(ok) + "/" + std::to_string(total) +
             " runs hit; worst |soft - B_d| " + fmt(worst_soft, 3) + " (<= 0.02), worst |hard - B_d| " +
             fmt(worst_hard, 3) + " (<= 0.05), min saturated fraction " + fmt(min_sat, 4) +
             " (>= 0.99), slowest run " + fmt(worst_secs, 3) + " s, total " +
             fmt(seconds_since(t0), 4) + " s" + os.str();
  return o;
}

Outcome accuracy_retention(EndToEnd& e2e) {
  int ok = 0;
  std::ostringstream os;
  for (std::uint64_t s : {0u, 1u, 2u}) {
    const auto& b = e2e.baseline(s);
    const auto& r = e2e.run(s, 0.5, true, true);
    const double drop = b.test_accuracy - *r.finetuned_accuracy;
    ok += drop <= 0.03;
    os << (s ? ", " : "") << "seed " << s << ": " << fmt(b.test_accuracy) << " -> "
       << fmt(*r.finetuned_accuracy);
  }
  Outcome o;
  o.pass = ok >= 2;
  o.detail = std::to_string(ok) + "/3 seeds within 3 points at B_d 0.5 (need >= 2); " + os.str();
  return o;
}

Outcome schedule_ablation(EndToEnd& e2e) {
  int ok = 0;
  std::ostringstream os;
  for (double budget : {0.7, 0.6, 0.5}) {
    double on = 0.0, off = 0.0;
    for (std::uint64_t s : {0u, 1u, 2u}) {
      on += *e2e.run(s, budget, true, true).finetuned_accuracy / 3.0;
      off += *e2e.run(s, budget, false, true).finetuned_accuracy / 3.0;
    }
    // Accuracies are multiples of 1/500 per seed; compare at that resolution.
    const bool win = on >= off - 1e-9;
    ok += win;
    os << (budget == 0.7 ? "" : ", ") << "B_d " << budget << ": on " << fmt(on) << " vs off "
       << fmt(off);
  }
  Outcome o;
  o.pass = ok >= 2;
  o.detail = std::to_string(ok) + "/3 budgets with schedule on >= off (mean of seeds 0-2, need >= 2); " +
             os.str();
  return o;
}

// ---------------------------------------------------------------------------
// 8. Frozen weights and reproducible RESULT lines.

std::string run_capture(const std::string& cmd, int& status) {
  std::string out;
  FILE* p = popen((cmd + " 2>/dev/null").c_str(), "r");
  if (!p) {
    status = -1;
    return out;
  }
  char buf[4096];
  while (std::fgets(buf, sizeof(buf), p)) out += buf;
  status = pclose(p);
  return out;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

/// Runs the CLI pipeline in `dir` and returns its RESULT lines.
std::vector<std::string> cli_pipeline(const std::string& cli, const fs::path& dir,
                                      std::string& error) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto p = [&](const char* name) { return quote((dir / name).string()); };
  const std::string cfg = " --config " + quote(profile_path);
  const std::vector<std::string> steps = {
      "synth-data --out " + p("data") + " --seed 0",
      "train-baseline --data " + p("data-train") + " --val " + p("data-val") + " --model-out " +
          p("base.dfc") + " --epochs 8 --log " + p("baseline.log") + cfg,
      "compress --model-in " + p("base.dfc") + " --data " + p("data-train") + " --state-out " +
          p("state.json") + " --budget 0.5 --log " + p("compress.log") + cfg,
      "realize --model-in " + p("base.dfc") + " --state " + p("state.json") + " --model-out " +
          p("small.dfc") + " --report " + p("plan.txt") + cfg,
      "finetune --model-in " + p("small.dfc") + " --data " + p("data-train") + " --val " +
          p("data-val") + " --model-out " + p("tuned.dfc") + " --epochs 8" + cfg,
      "eval --model-in " + p("tuned.dfc") + " --data " + p("data-test"),
      "report --log " + p("compress.log") + " --out " + p("compress.csv"),
  };
  std::vector<std::string> results;
  for (const auto& step : steps) {
    int status = 0;
    const auto out = run_capture(quote(cli) + " " + step, status);
    if (status != 0) {
      error = "step failed: " + step.substr(0, step.find(' '));
      return results;
    }
    std::istringstream in(out);
    std::string line;
    while (std::getline(in, line))
      if (line.rfind("RESULT ", 0) == 0) results.push_back(line);
  }
  return results;
}

Outcome frozen_and_deterministic(const std::string& cli, const fs::path& workdir) {
  // In-process: compress twice from the same baseline.
  const auto d = make_data(0);
  const auto base = train_baseline(d, 0, 5);
  const auto hash = io::weight_hash(base.model);
  auto cfg = toy_profile();
  cfg.budget = 0.5;
  const auto ccfg = cfg.compress_config(kCompressEpochs);
  const auto a = compress::compress(base.model, d.train, ccfg);
  const bool frozen = io::weight_hash(base.model) == hash;
  const auto b = compress::compress(base.model, d.train, ccfg);
  bool same = a.log.size() == b.log.size() && a.soft_ratio == b.soft_ratio &&
              a.state.gammas == b.state.gammas;
  for (std::size_t i = 0; same && i < a.log.size(); ++i)
    same = a.log[i].loss == b.log[i].loss && a.log[i].flop_ratio == b.log[i].flop_ratio;
  for (std::size_t u = 0; same && u < a.state.masks.size(); ++u)
    same = a.state.masks[u].storage() == b.state.masks[u].storage();
  const auto ra = realize::realize(base.model, a.state);
  const auto rb = realize::realize(base.model, b.state);
  same = same && io::serialize_model(ra.model) == io::serialize_model(rb.model);

  Outcome o;
  o.pass = frozen && same;
  o.detail = std::string("frozen hash ") + (frozen ? "unchanged" : "CHANGED") +
             ", in-process rerun " + (same ? "bit-identical" : "DIFFERS");
  if (cli.empty()) {
    o.detail += "; CLI pipeline not checked (no --cli given)";
    return o;
  }
  std::string err1, err2;
  const auto r1 = cli_pipeline(cli, workdir / "det_run1", err1);
  const auto r2 = cli_pipeline(cli, workdir / "det_run2", err2);
  const bool cli_ok = err1.empty() && err2.empty() && r1.size() == 7 && r1 == r2;
  // The compress RESULT line carries the weight hash of its input model.
  bool hash_line = false;
  for (const auto& line : r1)
    if (line.rfind("RESULT cmd=compress ", 0) == 0) hash_line = line.find("weight_hash=") != std::string::npos;
  o.pass = o.pass && cli_ok && hash_line;
  o.detail += ", CLI pipeline " + std::to_string(r1.size()) + " RESULT lines " +
              (cli_ok ? "identical across two runs" : "NOT identical") +
              (err1.empty() ? "" : " (" + err1 + ")") + (err2.empty() ? "" : " (" + err2 + ")");
  return o;
}

// ---------------------------------------------------------------------------
// 9. Loader robustness under fuzzed input, run in a child process so a crash
// is observed rather than fatal.

struct FuzzCounts {
  int model_raw = 0, model_raw_rejected = 0;
  int data_raw = 0, data_raw_rejected = 0;
  int model_sealed = 0, model_sealed_rejected = 0;
  int data_sealed = 0, data_sealed_rejected = 0;
  int wrong_exception = 0;
};

template <class F>
bool rejects(F&& f, FuzzCounts& c) {
  try {
    f();
    return false;
  } catch (const io::FormatError&) {
    return true;
  } catch (...) {
    ++c.wrong_exception;
    return true;
  }
}

FuzzCounts fuzz_loaders() {
  FuzzCounts c;
  auto m = model::build_model("c8b-p2-c12-f16", {3, 8, 8, 10});
  model::init_weights(m, 909);
  realize::factorize_layer(m, m.units()[1].layer, 4, linalg::Scheme::kSpatialSeparable);
  const auto model_bytes = io::serialize_model(m);
  io::SynthSpec spec;
  spec.count = 40;
  const auto raw = io::synth_dataset(909, spec).data;
  const fs::path tmp = fs::temp_directory_path() / ("dfc_fuzz_" + std::to_string(getpid()));
  io::save_dataset(raw, tmp.string());
  const auto files = io::data_files(tmp.string());
  const auto bin = io::read_file(files.bin);
  const auto meta_bytes = io::read_file(files.meta);
  const std::string meta(meta_bytes.begin(), meta_bytes.end());
  fs::remove(files.bin);
  fs::remove(files.meta);

  std::mt19937_64 rng(9);
  const auto model_path = (tmp.string() + ".dfc");
  for (int i = 0; i < 1000; ++i) {
    auto b = model_bytes;
    testing::corrupt(b, rng);
    ++c.model_raw;
    if (i % 10 == 0) {
      // Exercise the file path too.
      io::write_file(model_path, b);
      c.model_raw_rejected += rejects([&] { io::load_model(model_path); }, c);
    } else {
      c.model_raw_rejected += rejects([&] { io::parse_model(b); }, c);
    }
    testing::reseal_model(b);
    ++c.model_sealed;
    c.model_sealed_rejected += rejects([&] { io::serialize_model(io::parse_model(b)); }, c);
  }
  fs::remove(model_path);
  for (int i = 0; i < 1000; ++i) {
    auto b = bin;
    std::vector<std::uint8_t> mb(meta.begin(), meta.end());
    std::string mt = meta;
    if (i % 2 == 0) {
      testing::corrupt(b, rng);
    } else {
      testing::corrupt(mb, rng);
      mt.assign(mb.begin(), mb.end());
    }
    ++c.data_raw;
    c.data_raw_rejected += rejects([&] { io::parse_dataset(mt, b); }, c);
    const auto sealed = testing::reseal_meta(mt, b);
    ++c.data_sealed;
    c.data_sealed_rejected += rejects([&] { io::decode(io::parse_dataset(sealed, b)); }, c);
  }
  return c;
}

Outcome format_robustness() {
  int fds[2];
  if (pipe(fds) != 0) return {false, "pipe() failed"};
  const pid_t pid = fork();
  if (pid < 0) return {false, "fork() failed"};
  if (pid == 0) {
    close(fds[0]);
    const auto c = fuzz_loaders();
    const int v[] = {c.model_raw,    c.model_raw_rejected,    c.data_raw,    c.data_raw_rejected,
                     c.model_sealed, c.model_sealed_rejected, c.data_sealed, c.data_sealed_rejected,
                     c.wrong_exception};
    const auto n = write(fds[1], v, sizeof(v));
    _exit(n == static_cast<ssize_t>(sizeof(v)) ? 0 : 3);
  }
  close(fds[1]);
  int v[9] = {};
  std::size_t got = 0;
  while (got < sizeof(v)) {
    const auto n = read(fds[0], reinterpret_cast<char*>(v) + got, sizeof(v) - got);
    if (n <= 0) break;
    got += static_cast<std::size_t>(n);
  }
  close(fds[0]);
  int status = 0;
  waitpid(pid, &status, 0);
  Outcome o;
  if (WIFSIGNALED(status) || got != sizeof(v) || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    o.pass = false;
    o.detail = WIFSIGNALED(status) ? "fuzz child crashed with signal " + std::to_string(WTERMSIG(status))
                                   : "fuzz child did not report";
    return o;
  }
  o.pass = v[1] == v[0] && v[3] == v[2] && v[8] == 0;
  o.detail = "model: " + std::to_string(v[1]) + "/" + std::to_string(v[0]) +
             " corruptions rejected; dataset: " + std::to_string(v[3]) + "/" + std::to_string(v[2]) +
             " rejected; 0 crashes; checksum-resealed structural fuzz: model " +
             std::to_string(v[5]) + "/" + std::to_string(v[4]) + " and dataset " +
             std::to_string(v[7]) + "/" + std::to_string(v[6]) +
             " rejected, rest parsed consistently; non-format exceptions " + std::to_string(v[8]);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string cli;
  std::string workdir = (fs::temp_directory_path() / "dfc_acceptance").string();
  profile_path = DFC_TOY_PROFILE;
  app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 9));
  app.add_option("--cli", cli, "dfc executable for the pipeline determinism check");
  app.add_option("--workdir", workdir, "scratch directory");
  app.add_option("--profile", profile_path, "config profile for end-to-end runs")
      ->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::set<int> selected(only.begin(), only.end());
  EndToEnd e2e;
  // Criterion 7 is directional and does not gate the exit status.
  const std::set<int> soft = {7};
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, svt_oracle},
      {2, gradient_fidelity},
      {3, budget_consistency},
      {4, eckart_young},
      {5, [&] { return budget_hit(e2e); }},
      {6, [&] { return accuracy_retention(e2e); }},
      {7, [&] { return schedule_ablation(e2e); }},
      {8, [&] { return frozen_and_deterministic(cli, workdir); }},
      {9, format_robustness},
  };
  bool gate = true;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "CRITERION " << id << ' ' << (o.pass ? "PASS" : "FAIL")
              << (soft.count(id) ? " (soft)" : "") << ": " << o.detail << std::endl;
    if (!o.pass && !soft.count(id)) gate = false;
  }
  return gate ? 0 : 1;
}
