// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode automatic differentiation over Tensor values.
//
// A Tape records every op applied to tracked values. Constants (frozen
// weights, data) never get a gradient slot. With tracing disabled every op
// still computes the same forward value but nothing is recorded.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dfc/kernels.hpp"
#include "dfc/linalg.hpp"
#include "dfc/tensor.hpp"

namespace dfc::ad {

class Tape;

/// Handle to a value living on a tape. id < 0 means an untracked constant.
struct Var {
  Tape* tape = nullptr;
  std::shared_ptr<const Tensor> value;
  int id = -1;

  const Tensor& v() const { return *value; }
  const Shape& shape() const { return value->shape(); }
  bool tracked() const { return id >= 0; }
};

/// Maps upstream gradient to one gradient per input. Entries for inputs with
/// needs[i] == false may be left empty.
using BackwardFn =
    std::function<std::vector<Tensor>(const Tensor& grad_out, const std::vector<bool>& needs)>;

class Gradients {
 public:
  bool has(const Var& v) const { return v.tracked() && grads_.count(v.id) > 0; }
  /// Throws std::out_of_range when the variable has no gradient slot.
  const Tensor& of(const Var& v) const;

 private:
  friend class Tape;
  std::unordered_map<int, Tensor> grads_;
};

class Tape {
 public:
  explicit Tape(bool tracing = true) : tracing_(tracing) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool tracing() const { return tracing_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor t);
  /// Trainable leaf. Untracked when tracing is off.
  Var parameter(Tensor t);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn);

  /// Gradients of a scalar loss with respect to every parameter that
  /// contributed to it. May be called once per tape.
  Gradients backward(const Var& loss);

 private:
  struct Node {
    std::vector<int> inputs;
    BackwardFn fn;
    Shape shape;
    bool leaf = false;
  };
  bool tracing_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
};

// Elementwise and reductions.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
/// Elementwise product; b may also be a one-element tensor.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, float s);
Var add_scalar(const Var& a, float s);
Var sum(const Var& a);
Var mean(const Var& a);
Var square(const Var& a);
Var relu(const Var& a);
Var tanh(const Var& a);
/// 1 / (1 + exp(-steepness * (x - center)))
Var sigmoid(const Var& a, float steepness = 1.0f, float center = 0.0f);
Var reshape(const Var& a, Shape shape);

// Dense layers.
Var matmul(const Var& a, const Var& b);
/// x: [N, in], w: [out, in], b: [out] or null -> [N, out]
Var linear(const Var& x, const Var& w, const Var* b = nullptr);
Var conv2d(const Var& x, const Var& w, const kernels::Conv2dAttrs& attrs);
/// x: [N, C, H, W] plus per-channel bias b: [C].
Var add_channel_bias(const Var& x, const Var& b);
/// Batchnorm with stored statistics; gamma and beta may be tracked.
Var batchnorm_inference(const Var& x, const Var& gamma, const Var& beta, const Tensor& mean,
                        const Tensor& var, float eps);
Var mean_pool(const Var& x, int k);
/// Mean softmax cross-entropy over the batch. logits: [N, K].
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);

// Structured-weight ops used by the surrogate.
/// X: [R, C], s: [R / repeat]; row r is scaled by s[r / repeat].
Var row_scale(const Var& x, const Var& s, std::int64_t repeat = 1);
/// Tensor -> [rows, cols] per the matricization layout.
Var matricize(const Var& w, const linalg::MatricizationSpec& spec);
Var dematricize(const Var& m, const linalg::MatricizationSpec& spec);

struct SvtNodeOptions {
  linalg::SvtVjpOptions vjp;
};

/// SVT(X, gamma) with gamma a one-element tensor. The singular values of X
/// computed in the forward pass are written to `spectrum` when given.
Var svt(const Var& x, const Var& gamma, const SvtNodeOptions& options = {},
        std::vector<double>* spectrum = nullptr);

}  // namespace dfc::ad
