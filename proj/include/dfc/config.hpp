// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Flat key=value run configuration shared by every CLI command.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dfc/budget.hpp"
#include "dfc/compressor.hpp"
#include "dfc/linalg.hpp"

namespace dfc::config {

struct RunConfig {
  double budget = 0.5;
  double lambda = 1.0;
  double tau_c = 2.0;
  double mu0 = 5.0;
  double alpha = 50.0;
  double beta = 4.0;
  double epsilon = 0.02;
  /// Compress: epochs per outer pass. Training commands: total epochs. Unset
  /// means the command default.
  std::optional<int> epochs;
  int batch_size = 128;
  /// Training learning rate; unset means the command default.
  std::optional<double> lr;
  std::uint64_t seed = 0;
  linalg::Scheme scheme = linalg::Scheme::kFilterWise;
  bool schedule_on = true;

  double mask_lr = 0.01;
  double threshold_lr_scale = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int restart_cap = 5;
  budget::CountMode count_mode = budget::CountMode::kSigmoid;
  linalg::SvdGradMode svd_grad = linalg::SvdGradMode::kFull;
  compress::ScheduleIndex schedule_index = compress::ScheduleIndex::kGlobal;
  bool shrink = false;
  bool augment = false;

  /// Sets one key from text. Throws std::invalid_argument for unknown keys and
  /// malformed values.
  void set(const std::string& key, const std::string& value);

  /// Ordered (key, value) pairs of the effective configuration.
  std::vector<std::pair<std::string, std::string>> entries() const;

  compress::CompressConfig compress_config(int default_epochs) const;
  compress::TrainConfig train_config(int default_epochs, double default_lr) const;
};

/// Keys accepted by RunConfig::set.
const std::vector<std::string>& known_keys();

/// Applies "key=value" lines to `cfg`. Blank lines and lines starting with '#'
/// are skipped. Errors name the line number.
void apply_text(RunConfig& cfg, const std::string& text);

RunConfig load(const std::string& path);

}  // namespace dfc::config
