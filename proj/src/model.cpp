// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/model.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dfc::model {

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kLinear: return "linear";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kReLU: return "relu";
    case LayerKind::kPool: return "pool";
    case LayerKind::kFlatten: return "flatten";
  }
  return "unknown";
}

namespace {

[[noreturn]] void layer_error(std::size_t i, const Layer& l, const std::string& what) {
  throw std::invalid_argument("layer " + std::to_string(i) + " (" + to_string(l.kind) +
                              "): " + what);
}

void expect_shape(std::size_t i, const Layer& l, const char* name, const Tensor& t,
                  const Shape& want) {
  if (t.shape() != want) {
    layer_error(i, l, std::string(name) + " has shape " + shape_str(t.shape()) + ", expected " +
                          shape_str(want));
  }
}

}  // namespace

void ModelGraph::infer_shapes() {
  if (input.channels < 1 || input.height < 1 || input.width < 1 || input.classes < 1) {
    throw std::invalid_argument("model input spec has a non-positive extent");
  }
  std::int64_t c = input.channels, h = input.height, w = input.width;
  bool flat = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Layer& l = layers[i];
    l.in_c = c;
    l.in_h = h;
    l.in_w = w;
    switch (l.kind) {
      case LayerKind::kConv: {
        if (flat) layer_error(i, l, "convolution after flatten");
        if (l.c_in != c) {
          layer_error(i, l, "expects " + std::to_string(l.c_in) + " input channels, got " +
                                std::to_string(c));
        }
        if (l.factorized) {
          if (l.rank < 1) layer_error(i, l, "factorized with rank < 1");
          if (l.scheme == linalg::Scheme::kFilterWise) {
            expect_shape(i, l, "w1", l.w1, {l.rank, l.c_in, l.kh, l.kw});
            expect_shape(i, l, "w2", l.w2, {l.c_out, l.rank, 1, 1});
          } else {
            expect_shape(i, l, "w1", l.w1, {l.rank, l.c_in, l.kh, 1});
            expect_shape(i, l, "w2", l.w2, {l.c_out, l.rank, 1, l.kw});
          }
        } else {
          expect_shape(i, l, "weight", l.w, {l.c_out, l.c_in, l.kh, l.kw});
        }
        try {
          h = kernels::conv_out_extent(h, l.kh, l.attrs.stride_h, l.attrs.pad_h);
          w = kernels::conv_out_extent(w, l.kw, l.attrs.stride_w, l.attrs.pad_w);
        } catch (const std::invalid_argument& e) {
          layer_error(i, l, e.what());
        }
        c = l.c_out;
        break;
      }
      case LayerKind::kLinear: {
        if (!flat) layer_error(i, l, "linear layer needs a flatten before it");
        if (l.c_in != c * h * w) {
          layer_error(i, l, "expects " + std::to_string(l.c_in) + " input features, got " +
                                std::to_string(c * h * w));
        }
        if (l.factorized) {
          if (l.rank < 1) layer_error(i, l, "factorized with rank < 1");
          expect_shape(i, l, "w1", l.w1, {l.rank, l.c_in});
          expect_shape(i, l, "w2", l.w2, {l.c_out, l.rank});
        } else {
          expect_shape(i, l, "weight", l.w, {l.c_out, l.c_in});
        }
        c = l.c_out;
        h = w = 1;
        break;
      }
      case LayerKind::kBatchNorm:
        for (const Tensor* t : {&l.gamma, &l.beta, &l.running_mean, &l.running_var})
          expect_shape(i, l, "batchnorm parameter", *t, {c});
        break;
      case LayerKind::kReLU:
        break;
      case LayerKind::kPool:
        if (flat) layer_error(i, l, "pool after flatten");
        if (l.pool < 1 || h % l.pool != 0 || w % l.pool != 0) {
          layer_error(i, l, "window " + std::to_string(l.pool) + " does not tile " +
                                std::to_string(h) + "x" + std::to_string(w));
        }
        h /= l.pool;
        w /= l.pool;
        break;
      case LayerKind::kFlatten:
        flat = true;
        break;
    }
    if (l.is_weighted() && l.has_bias) expect_shape(i, l, "bias", l.bias, {l.c_out});
    l.out_c = c;
    l.out_h = h;
    l.out_w = w;
  }
  if (!flat || layers.empty() || layers.back().kind != LayerKind::kLinear) {
    throw std::invalid_argument("model must end in a linear classifier after a flatten");
  }
  if (c != input.classes) {
    throw std::invalid_argument("classifier emits " + std::to_string(c) + " outputs for " +
                                std::to_string(input.classes) + " classes");
  }
}

std::vector<UnitGeometry> ModelGraph::units() const {
  std::vector<UnitGeometry> out;
  std::size_t last = 0;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].is_weighted()) last = i;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Layer& l = layers[i];
    if (!l.is_weighted()) continue;
    if (l.factorized) layer_error(i, l, "budget geometry needs a dense model");
    UnitGeometry u;
    u.layer = i;
    u.c_out = l.c_out;
    u.prunable = i != last;
    u.weight_shape = l.w.shape();
    if (l.kind == LayerKind::kConv) {
      u.c_in = l.c_in;
      u.kernel_area = static_cast<std::int64_t>(l.kh) * l.kw;
      u.out_area = l.out_h * l.out_w;
    } else {
      // Flattened input: channels of the preceding feature map, kernel over
      // its spatial extent.
      const std::int64_t spatial = l.in_h * l.in_w;
      u.c_in = l.c_in / spatial;
      u.kernel_area = spatial;
      u.out_area = 1;
    }
    out.push_back(std::move(u));
  }
  return out;
}

ModelGraph build_model(const std::string& arch, const InputSpec& input) {
  ModelGraph m;
  m.input = input;
  std::int64_t c = input.channels, h = input.height, w = input.width;
  bool flat = false;
  auto flatten = [&] {
    if (flat) return;
    Layer f;
    f.kind = LayerKind::kFlatten;
    m.layers.push_back(f);
    c = c * h * w;
    h = w = 1;
    flat = true;
  };
  auto linear = [&](std::int64_t out, bool bias) {
    Layer l;
    l.kind = LayerKind::kLinear;
    l.c_in = c;
    l.c_out = out;
    l.w = Tensor({out, c});
    l.has_bias = bias;
    if (bias) l.bias = Tensor({out});
    m.layers.push_back(std::move(l));
    c = out;
  };
  std::stringstream ss(arch);
  std::string tok;
  while (std::getline(ss, tok, '-')) {
    if (tok.empty()) throw std::invalid_argument("arch '" + arch + "': empty token");
    auto number = [&](std::size_t from, std::size_t to) -> std::int64_t {
      const auto digits = tok.substr(from, to - from);
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
        throw std::invalid_argument("arch '" + arch + "': bad token '" + tok + "'");
      }
      const auto v = std::stoll(digits);
      if (v < 1) throw std::invalid_argument("arch '" + arch + "': zero size in '" + tok + "'");
      return v;
    };
    if (tok == "gap") {
      if (flat) throw std::invalid_argument("arch '" + arch + "': gap after flatten");
      if (h != w) throw std::invalid_argument("arch '" + arch + "': gap needs a square map");
      Layer p;
      p.kind = LayerKind::kPool;
      p.pool = static_cast<int>(h);
      m.layers.push_back(p);
      h = w = 1;
      flatten();
    } else if (tok[0] == 'c') {
      if (flat) throw std::invalid_argument("arch '" + arch + "': conv after flatten");
      const bool bn = tok.back() == 'b';
      const auto out = number(1, bn ? tok.size() - 1 : tok.size());
      Layer l;
      l.kind = LayerKind::kConv;
      l.c_in = c;
      l.c_out = out;
      l.kh = l.kw = 3;
      l.attrs = {1, 1, 1, 1};
      l.w = Tensor({out, c, 3, 3});
      m.layers.push_back(std::move(l));
      c = out;
      if (bn) {
        Layer b;
        b.kind = LayerKind::kBatchNorm;
        b.gamma = Tensor({out}, 1.0f);
        b.beta = Tensor({out});
        b.running_mean = Tensor({out});
        b.running_var = Tensor({out}, 1.0f);
        m.layers.push_back(std::move(b));
      }
      Layer r;
      r.kind = LayerKind::kReLU;
      m.layers.push_back(r);
    } else if (tok[0] == 'p') {
      if (flat) throw std::invalid_argument("arch '" + arch + "': pool after flatten");
      const auto k = number(1, tok.size());
      if (h % k != 0 || w % k != 0) {
        throw std::invalid_argument("arch '" + arch + "': pool " + tok + " does not tile " +
                                    std::to_string(h) + "x" + std::to_string(w));
      }
      Layer p;
      p.kind = LayerKind::kPool;
      p.pool = static_cast<int>(k);
      m.layers.push_back(p);
      h /= k;
      w /= k;
    } else if (tok[0] == 'f') {
      const auto out = number(1, tok.size());
      flatten();
      linear(out, false);
      Layer r;
      r.kind = LayerKind::kReLU;
      m.layers.push_back(r);
    } else {
      throw std::invalid_argument("arch '" + arch + "': unknown token '" + tok + "'");
    }
  }
  flatten();
  linear(input.classes, true);
  m.infer_shapes();
  return m;
}

void init_weights(ModelGraph& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto he = [&](Tensor& t, std::int64_t fan_in) {
    std::normal_distribution<float> d(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    for (auto& v : t.storage()) v = d(rng);
  };
  for (auto& l : m.layers) {
    if (l.is_weighted()) {
      const std::int64_t fan_in = l.c_in * l.kh * l.kw;
      if (l.factorized) {
        he(l.w1, fan_in);
        he(l.w2, l.rank * (l.scheme == linalg::Scheme::kFilterWise ? 1 : l.kw));
      } else {
        he(l.w, fan_in);
      }
      if (l.has_bias) l.bias = Tensor({l.c_out});
    } else if (l.kind == LayerKind::kBatchNorm) {
      const auto c = l.gamma.numel();
      l.gamma = Tensor({static_cast<std::int64_t>(c)}, 1.0f);
      l.beta = Tensor({static_cast<std::int64_t>(c)});
    }
  }
}

std::vector<BoundLayer> bind(ad::Tape& tape, const ModelGraph& m, bool trainable) {
  auto make = [&](const Tensor& t) {
    return trainable ? tape.parameter(t) : tape.constant(t);
  };
  std::vector<BoundLayer> out(m.layers.size());
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const Layer& l = m.layers[i];
    BoundLayer& b = out[i];
    if (l.is_weighted()) {
      if (l.factorized) {
        b.w1 = make(l.w1);
        b.w2 = make(l.w2);
      } else {
        b.w = make(l.w);
      }
      if (l.has_bias) b.bias = make(l.bias);
    } else if (l.kind == LayerKind::kBatchNorm) {
      b.gamma = make(l.gamma);
      b.beta = make(l.beta);
    }
  }
  return out;
}

std::vector<Tensor*> parameter_tensors(ModelGraph& m) {
  std::vector<Tensor*> out;
  for (auto& l : m.layers) {
    if (l.is_weighted()) {
      if (l.factorized) {
        out.push_back(&l.w1);
        out.push_back(&l.w2);
      } else {
        out.push_back(&l.w);
      }
      if (l.has_bias) out.push_back(&l.bias);
    } else if (l.kind == LayerKind::kBatchNorm) {
      out.push_back(&l.gamma);
      out.push_back(&l.beta);
    }
  }
  return out;
}

std::vector<ad::Var> parameter_vars(const ModelGraph& m, const std::vector<BoundLayer>& bound) {
  std::vector<ad::Var> out;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const Layer& l = m.layers[i];
    const BoundLayer& b = bound[i];
    if (l.is_weighted()) {
      if (l.factorized) {
        out.push_back(b.w1);
        out.push_back(b.w2);
      } else {
        out.push_back(b.w);
      }
      if (l.has_bias) out.push_back(b.bias);
    } else if (l.kind == LayerKind::kBatchNorm) {
      out.push_back(b.gamma);
      out.push_back(b.beta);
    }
  }
  return out;
}

ad::Var forward(const ModelGraph& m, const std::vector<BoundLayer>& bound, const ad::Var& x,
                const std::map<std::size_t, ad::Var>& overrides) {
  if (bound.size() != m.layers.size()) {
    throw std::invalid_argument("forward: bound weights do not match the model");
  }
  const Shape want{m.input.channels, m.input.height, m.input.width};
  if (x.v().rank() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != want) {
    throw std::invalid_argument("forward: batch " + shape_str(x.shape()) +
                                " does not match model input [N" + shape_str(want).substr(1));
  }
  for (const auto& [idx, v] : overrides) {
    if (idx >= m.layers.size() || !m.layers[idx].is_weighted() || m.layers[idx].factorized) {
      throw std::invalid_argument("forward: override for layer " + std::to_string(idx) +
                                  " which has no dense weight");
    }
    if (v.shape() != m.layers[idx].w.shape()) {
      throw std::invalid_argument("forward: override for layer " + std::to_string(idx) +
                                  " has shape " + shape_str(v.shape()) + ", expected " +
                                  shape_str(m.layers[idx].w.shape()));
    }
  }
  ad::Var h = x;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const Layer& l = m.layers[i];
    const BoundLayer& b = bound[i];
    switch (l.kind) {
      case LayerKind::kConv: {
        if (l.factorized) {
          if (l.scheme == linalg::Scheme::kFilterWise) {
            h = ad::conv2d(h, b.w1, l.attrs);
            h = ad::conv2d(h, b.w2, {1, 1, 0, 0});
          } else {
            h = ad::conv2d(h, b.w1, {l.attrs.stride_h, 1, l.attrs.pad_h, 0});
            h = ad::conv2d(h, b.w2, {1, l.attrs.stride_w, 0, l.attrs.pad_w});
          }
        } else {
          auto it = overrides.find(i);
          h = ad::conv2d(h, it == overrides.end() ? b.w : it->second, l.attrs);
        }
        if (l.has_bias) h = ad::add_channel_bias(h, b.bias);
        break;
      }
      case LayerKind::kLinear: {
        const ad::Var* bias = l.has_bias ? &b.bias : nullptr;
        if (l.factorized) {
          h = ad::linear(ad::linear(h, b.w1), b.w2, bias);
        } else {
          auto it = overrides.find(i);
          h = ad::linear(h, it == overrides.end() ? b.w : it->second, bias);
        }
        break;
      }
      case LayerKind::kBatchNorm:
        h = ad::batchnorm_inference(h, b.gamma, b.beta, l.running_mean, l.running_var, l.eps);
        break;
      case LayerKind::kReLU:
        h = ad::relu(h);
        break;
      case LayerKind::kPool:
        h = ad::mean_pool(h, l.pool);
        break;
      case LayerKind::kFlatten:
        h = ad::reshape(h, {h.v().dim(0), static_cast<std::int64_t>(h.v().numel()) /
                                              h.v().dim(0)});
        break;
    }
  }
  return h;
}

Tensor forward(const ModelGraph& m, const Tensor& x,
               const std::map<std::size_t, Tensor>& overrides) {
  ad::Tape tape(false);
  auto bound = bind(tape, m, false);
  std::map<std::size_t, ad::Var> ov;
  for (const auto& [idx, t] : overrides) ov.emplace(idx, tape.constant(t));
  return forward(m, bound, tape.constant(x), ov).v();
}

FlopReport hard_flops(const ModelGraph& original, const std::vector<std::vector<bool>>& masks,
                      const std::vector<std::optional<std::int64_t>>& ranks) {
  const auto units = original.units();
  if (masks.size() != units.size() || ranks.size() != units.size()) {
    throw std::invalid_argument("hard_flops: expected " + std::to_string(units.size()) +
                                " masks and ranks, got " + std::to_string(masks.size()) + " and " +
                                std::to_string(ranks.size()));
  }
  FlopReport rep;
  std::int64_t c_prev = original.input.channels;
  for (std::size_t u = 0; u < units.size(); ++u) {
    const auto& g = units[u];
    if (static_cast<std::int64_t>(masks[u].size()) != g.c_out) {
      throw std::invalid_argument("hard_flops: mask " + std::to_string(u) + " has " +
                                  std::to_string(masks[u].size()) + " entries for " +
                                  std::to_string(g.c_out) + " filters");
    }
    std::int64_t c = 0;
    for (bool b : masks[u]) c += b ? 1 : 0;
    if (ranks[u]) {
      const auto r = *ranks[u];
      const auto bound = std::min(c, g.kernel_area * c_prev);
      if (r < 0 || r > bound) {
        throw std::invalid_argument("hard_flops: rank " + std::to_string(r) + " of unit " +
                                    std::to_string(u) + " outside [0, " + std::to_string(bound) +
                                    "]");
      }
      rep.flops += g.out_area * r * (g.kernel_area * c_prev + c);
    } else {
      rep.flops += g.out_area * g.kernel_area * c_prev * c;
    }
    rep.dense_flops += g.dense_flops();
    c_prev = c;
  }
  return rep;
}

std::int64_t count_flops(const ModelGraph& m) {
  std::int64_t total = 0;
  for (const auto& l : m.layers) {
    if (l.kind == LayerKind::kConv) {
      if (!l.factorized) {
        total += l.out_h * l.out_w * l.c_out * l.c_in * l.kh * l.kw;
      } else if (l.scheme == linalg::Scheme::kFilterWise) {
        total += l.out_h * l.out_w * l.rank * (l.c_in * l.kh * l.kw + l.c_out);
      } else {
        // First factor keeps the input width; the second applies the kw taps.
        total += l.out_h * l.in_w * l.rank * l.c_in * l.kh;
        total += l.out_h * l.out_w * l.c_out * l.rank * l.kw;
      }
    } else if (l.kind == LayerKind::kLinear) {
      total += l.factorized ? l.rank * (l.c_in + l.c_out) : l.c_in * l.c_out;
    }
  }
  return total;
}

std::int64_t param_count(const ModelGraph& m) {
  std::int64_t total = 0;
  for (const auto& l : m.layers) {
    if (l.is_weighted()) {
      total += static_cast<std::int64_t>(l.factorized ? l.w1.numel() + l.w2.numel() : l.w.numel());
      if (l.has_bias) total += static_cast<std::int64_t>(l.bias.numel());
    } else if (l.kind == LayerKind::kBatchNorm) {
      total += static_cast<std::int64_t>(l.gamma.numel() + l.beta.numel());
    }
  }
  return total;
}

}  // namespace dfc::model
