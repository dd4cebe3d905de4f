// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// The selection loop that learns filter masks and SVT thresholds over a frozen
// network under the FLOP budget, plus supervised training and evaluation.

#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "dfc/budget.hpp"
#include "dfc/io.hpp"
#include "dfc/linalg.hpp"
#include "dfc/model.hpp"
#include "dfc/surrogate.hpp"

namespace dfc::compress {

/// Which iteration index drives the steepness schedule.
enum class ScheduleIndex {
  /// One counter across epochs and outer passes.
  kGlobal,
  /// The minibatch index within the current epoch.
  kPerEpoch,
};

ScheduleIndex parse_schedule_index(const std::string& text);
std::string to_string(ScheduleIndex s);

struct CompressConfig {
  budget::BudgetConfig budget;
  surrogate::SteepnessSchedule schedule;
  /// E: epochs per pass of the outer loop.
  int epochs = 2;
  int batch_size = 128;
  /// Outer loop stops once |B_cal - B_d| < epsilon.
  double epsilon = 0.02;
  /// Additional passes allowed after the first one.
  int restart_cap = 5;
  double mask_lr = 0.01;
  /// Threshold learning rate is this times sigma_1 of the layer.
  double threshold_lr_scale = 0.01;
  double momentum = 0.9;
  linalg::Scheme scheme = linalg::Scheme::kFilterWise;
  budget::CountMode count_mode = budget::CountMode::kSigmoid;
  linalg::SvdGradMode svd_grad = linalg::SvdGradMode::kFull;
  ScheduleIndex schedule_index = ScheduleIndex::kGlobal;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Learnable selection variables and cached spectra, one entry per
/// conv/linear unit of the original model.
struct SelectionState {
  linalg::Scheme scheme = linalg::Scheme::kFilterWise;
  /// Per-unit mask vectors; empty for the non-prunable classifier.
  std::vector<Tensor> masks;
  std::vector<double> gammas;
  /// Singular values of the unmasked matricized weights.
  std::vector<std::vector<double>> original_spectra;
  /// Spectra the soft ranks were last measured on (see budget_spectra).
  std::vector<std::vector<double>> spectra;
  std::vector<double> tau;
  std::int64_t iteration = 0;
  double mu = 0.0;
};

/// Masks all ones, thresholds zero, spectra of the frozen weights.
SelectionState initial_state(const model::ModelGraph& m, const CompressConfig& cfg);

/// Singular values the soft ranks are measured on: each matricized weight with
/// its own filter gates on the rows and the preceding unit's gates on the
/// columns of the matching input channels. This tracks the spectrum of the
/// pruned weight that realization decomposes.
std::vector<std::vector<double>> budget_spectra(const model::ModelGraph& m,
                                                const SelectionState& state, double mu);

/// Soft budget ratio at `state` with steepness mu; refreshes state.spectra.
double soft_ratio(const model::ModelGraph& m, SelectionState& state, const CompressConfig& cfg,
                  double mu);

struct IterationRecord {
  std::int64_t iteration = 0;
  double loss = 0.0;
  double penalty = 0.0;
  double flop_ratio = 0.0;
  double mu = 0.0;
  double wall_ms = 0.0;
};

enum class RunStatus { kConverged, kRestartCapReached };

struct CompressResult {
  SelectionState state;
  std::vector<IterationRecord> log;
  /// Soft ratio of the returned state.
  double soft_ratio = 0.0;
  int passes = 0;
  RunStatus status = RunStatus::kConverged;
  std::vector<std::string> warnings;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, SelectionState last_good)
      : std::runtime_error(what), last_good_(std::move(last_good)) {}
  const SelectionState& last_good() const { return last_good_; }

 private:
  SelectionState last_good_;
};

/// Called after every iteration; used for streaming logs.
using IterationCallback = std::function<void(const IterationRecord&)>;

CompressResult compress(const model::ModelGraph& m, const io::Dataset& train,
                        const CompressConfig& cfg, const IterationCallback& on_iteration = {});

/// Mask gate values phi_s(m, mu) over all prunable units.
std::vector<double> gate_values(const SelectionState& state, double mu);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 128;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
  bool augment_flip = false;
  bool augment_crop = false;
};

struct EvalResult {
  double accuracy = 0.0;
  std::int64_t correct = 0;
  std::int64_t total = 0;
  /// confusion[true][predicted]
  std::vector<std::vector<std::int64_t>> confusion;
};

/// Argmax predictions (ties to the lowest class index).
EvalResult evaluate(const model::ModelGraph& m, const io::Dataset& data, int batch_size = 250);

struct TrainResult {
  model::ModelGraph model;
  /// Validation accuracy after each epoch; entry 0 is before training.
  std::vector<double> val_accuracy;
  std::vector<double> train_loss;
  int best_epoch = 0;
};

/// SGD with momentum on every weight. With a validation set the snapshot with
/// the best validation accuracy (epoch 0 included) is returned, otherwise the
/// final weights.
TrainResult train(const model::ModelGraph& m, const io::Dataset& train_set,
                  const io::Dataset* val_set, const TrainConfig& cfg);

}  // namespace dfc::compress
