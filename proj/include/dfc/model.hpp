// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Feedforward network description, forward execution and exact FLOP and
// parameter accounting.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dfc/autodiff.hpp"
#include "dfc/kernels.hpp"
#include "dfc/linalg.hpp"
#include "dfc/tensor.hpp"

namespace dfc::model {

enum class LayerKind { kConv = 0, kLinear = 1, kBatchNorm = 2, kReLU = 3, kPool = 4, kFlatten = 5 };

std::string to_string(LayerKind k);

struct InputSpec {
  std::int64_t channels = 3;
  std::int64_t height = 8;
  std::int64_t width = 8;
  std::int64_t classes = 10;

  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

struct Layer {
  LayerKind kind = LayerKind::kReLU;

  // Conv / Linear geometry. For Linear, kh = kw = 1.
  std::int64_t c_in = 0;
  std::int64_t c_out = 0;
  int kh = 1;
  int kw = 1;
  kernels::Conv2dAttrs attrs;

  // Dense weight: [c_out, c_in, kh, kw] (conv) or [c_out, c_in] (linear).
  Tensor w;
  // Factorized weights. Conv: w1 then w2 applied in sequence. Linear:
  // w1 [rank, c_in], w2 [c_out, rank].
  bool factorized = false;
  std::int64_t rank = 0;
  linalg::Scheme scheme = linalg::Scheme::kFilterWise;
  Tensor w1;
  Tensor w2;
  bool has_bias = false;
  Tensor bias;

  // BatchNorm (inference statistics are never updated).
  Tensor gamma, beta, running_mean, running_var;
  float eps = 1e-5f;

  // Pool window.
  int pool = 0;

  // Filled by ModelGraph::infer_shapes: per-sample input and output extents.
  std::int64_t in_c = 0, in_h = 0, in_w = 0;
  std::int64_t out_c = 0, out_h = 0, out_w = 0;

  bool is_weighted() const { return kind == LayerKind::kConv || kind == LayerKind::kLinear; }
};

/// Layer geometry of a dense conv/linear layer as used by the FLOP budget.
/// A linear layer is a convolution whose kernel covers its whole input: the
/// kernel area is the spatial area of the flattened feature map and A = 1.
struct UnitGeometry {
  std::size_t layer = 0;
  std::int64_t c_in = 0;
  std::int64_t c_out = 0;
  std::int64_t kernel_area = 1;
  std::int64_t out_area = 1;
  /// The final classifier keeps all of its outputs.
  bool prunable = true;
  /// Shape used for matricization (the dense weight shape).
  Shape weight_shape;

  std::int64_t dense_flops() const { return out_area * kernel_area * c_in * c_out; }
};

class ModelGraph {
 public:
  InputSpec input;
  std::vector<Layer> layers;

  /// Recomputes per-layer extents and checks channel compatibility and
  /// weight shapes. Throws std::invalid_argument naming the layer.
  void infer_shapes();

  /// Dense conv/linear layers in order. Throws if any layer is factorized.
  std::vector<UnitGeometry> units() const;
};

/// Arch grammar, dash separated: cN (3x3 conv, pad 1, + ReLU), cNb (conv +
/// batchnorm + ReLU), pK (k x k mean pool), gap (global mean pool + flatten),
/// fN (linear + ReLU). A flatten is inserted before the first fN if needed and
/// the final linear classifier with bias is implied.
ModelGraph build_model(const std::string& arch, const InputSpec& input);

/// He-normal weights, zero biases, unit batchnorm. Deterministic in seed.
void init_weights(ModelGraph& m, std::uint64_t seed);

/// Traced views of a layer's tensors, created once per tape.
struct BoundLayer {
  ad::Var w, w1, w2, bias, gamma, beta;
};

/// Binds every weight to the tape, as parameters when trainable.
std::vector<BoundLayer> bind(ad::Tape& tape, const ModelGraph& m, bool trainable);

/// Trainable tensors of the model in a fixed order, paired with the bound
/// variables produced by bind().
std::vector<Tensor*> parameter_tensors(ModelGraph& m);
std::vector<ad::Var> parameter_vars(const ModelGraph& m, const std::vector<BoundLayer>& bound);

/// Logits for x: [N, C, H, W]. `overrides` replaces the dense weight of the
/// given layer indices.
ad::Var forward(const ModelGraph& m, const std::vector<BoundLayer>& bound, const ad::Var& x,
                const std::map<std::size_t, ad::Var>& overrides = {});
Tensor forward(const ModelGraph& m, const Tensor& x,
               const std::map<std::size_t, Tensor>& overrides = {});

struct FlopReport {
  std::int64_t flops = 0;
  std::int64_t dense_flops = 0;
  double ratio() const {
    return dense_flops == 0 ? 0.0 : static_cast<double>(flops) / static_cast<double>(dense_flops);
  }
};

/// Exact multiply-accumulate count for a dense model under binary masks and
/// optional ranks. masks[u] covers unit u (see units()); ranks[u] unset keeps
/// the unit dense, otherwise it counts A r (k^2 c_prev + c).
FlopReport hard_flops(const ModelGraph& original, const std::vector<std::vector<bool>>& masks,
                      const std::vector<std::optional<std::int64_t>>& ranks);

/// Multiply-accumulates of every conv and linear layer of a (possibly
/// factorized) model, per sample.
std::int64_t count_flops(const ModelGraph& m);

/// Element count of all weight, bias and batchnorm affine tensors.
std::int64_t param_count(const ModelGraph& m);

}  // namespace dfc::model
