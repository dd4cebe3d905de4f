// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Model container, dataset files and synthetic data.
//
// Model container ("DFC1"), little-endian:
//   magic "DFC1" | u32 version | i64 C, H, W, classes | u32 layer count
//   per layer: u32 kind | i64 geometry[kGeometryFields] | u32 tensor count |
//              per tensor: u32 ndim | i64 dims[ndim] | u64 offset | u64 bytes
//   u64 payload bytes | payload (f32, row-major) | u32 crc32 of all prior bytes
//
// Dataset: <stem>.bin holds `count` records of [u8 label][C*H*W u8 pixels],
// channel-major; <stem>.meta holds key=value lines (width, height, channels,
// classes, count, data_crc32) followed by meta_crc32 over the preceding text.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dfc/model.hpp"
#include "dfc/tensor.hpp"

namespace dfc::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serialize_model(const model::ModelGraph& m);
model::ModelGraph parse_model(std::span<const std::uint8_t> bytes);
void save_model(const model::ModelGraph& m, const std::string& path);
model::ModelGraph load_model(const std::string& path);

/// FNV-1a over every weight tensor's bytes, for frozen-weight checks.
std::uint64_t weight_hash(const model::ModelGraph& m);

/// Undecoded dataset: u8 labels and u8 pixels, record-major.
struct RawDataset {
  std::int64_t channels = 0, height = 0, width = 0, classes = 0;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> pixels;  // count * C*H*W

  std::int64_t count() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t record_size() const { return channels * height * width; }
};

/// Decoded dataset with pixels scaled to [0, 1].
struct Dataset {
  std::int64_t channels = 0, height = 0, width = 0, classes = 0;
  Tensor images;  // [N, C, H, W]
  std::vector<int> labels;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  /// Gathers the given sample indices into a batch.
  void gather(std::span<const std::int64_t> idx, Tensor& x, std::vector<int>& y) const;
};

Dataset decode(const RawDataset& raw);

struct DataFiles {
  std::string bin;
  std::string meta;
};
/// "<stem>.bin" / "<stem>.meta"; a trailing ".bin" on `path` is stripped.
DataFiles data_files(const std::string& path);

std::string serialize_meta(const RawDataset& raw);
RawDataset parse_dataset(const std::string& meta_text, std::span<const std::uint8_t> bin);
void save_dataset(const RawDataset& raw, const std::string& path);
RawDataset load_raw_dataset(const std::string& path);
Dataset load_dataset(const std::string& path);

struct SynthSpec {
  std::int64_t channels = 3, height = 8, width = 8, classes = 10, count = 3000;
  /// Pixel noise standard deviation (u8 units).
  double noise = 48.0;
  /// Minimum prototype distance in units of `noise`.
  double separation = 6.5;
  /// 3x3 box-blur passes applied to each prototype channel.
  int smoothing = 1;
};

struct SynthResult {
  RawDataset data;
  /// Class prototypes, [classes][C*H*W], before noise and quantization.
  std::vector<std::vector<double>> prototypes;
};

/// Gaussian class prototypes plus Gaussian noise, balanced labels in a seeded
/// shuffle. Deterministic in `seed`.
SynthResult synth_dataset(std::uint64_t seed, const SynthSpec& spec);

/// Consecutive slices of the given sizes; throws if they exceed the data.
std::vector<RawDataset> split(const RawDataset& raw, const std::vector<std::int64_t>& sizes);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace dfc::io
