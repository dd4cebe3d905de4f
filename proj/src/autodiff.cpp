// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dfc::ad {

const Tensor& Gradients::of(const Var& v) const {
  auto it = grads_.find(v.id);
  if (!v.tracked() || it == grads_.end()) {
    throw std::out_of_range("no gradient recorded for this variable");
  }
  return it->second;
}

Var Tape::constant(Tensor t) {
  return Var{this, std::make_shared<const Tensor>(std::move(t)), -1};
}

Var Tape::parameter(Tensor t) {
  if (!tracing_) return constant(std::move(t));
  Node n;
  n.shape = t.shape();
  n.leaf = true;
  nodes_.push_back(std::move(n));
  return Var{this, std::make_shared<const Tensor>(std::move(t)),
             static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn) {
  bool any = false;
  for (const auto& in : inputs) {
    if (in.tracked()) {
      if (in.tape != this) throw std::invalid_argument("op mixes variables from different tapes");
      any = true;
    }
  }
  if (!tracing_ || !any) return constant(std::move(value));
  Node n;
  n.shape = value.shape();
  n.fn = std::move(fn);
  for (const auto& in : inputs) n.inputs.push_back(in.id);
  nodes_.push_back(std::move(n));
  return Var{this, std::make_shared<const Tensor>(std::move(value)),
             static_cast<int>(nodes_.size() - 1)};
}

namespace {

void accumulate(std::optional<Tensor>& slot, Tensor g) {
  if (!slot) {
    slot = std::move(g);
    return;
  }
  if (slot->shape() != g.shape()) {
    throw std::logic_error("gradient shape mismatch " + shape_str(slot->shape()) + " vs " +
                           shape_str(g.shape()));
  }
  for (std::size_t i = 0; i < g.numel(); ++i) (*slot)[i] += g[i];
}

}  // namespace

Gradients Tape::backward(const Var& loss) {
  if (consumed_) throw std::logic_error("backward called twice on the same tape");
  if (loss.value->numel() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got shape " +
                                shape_str(loss.shape()));
  }
  consumed_ = true;
  Gradients out;
  if (!loss.tracked()) return out;
  if (loss.tape != this) throw std::invalid_argument("loss belongs to a different tape");

  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads[loss.id] = Tensor(loss.shape(), 1.0f);
  for (int id = loss.id; id >= 0; --id) {
    auto& slot = grads[id];
    if (!slot) continue;
    Node& node = nodes_[id];
    if (node.leaf) {
      out.grads_.emplace(id, std::move(*slot));
      continue;
    }
    std::vector<bool> needs(node.inputs.size());
    for (std::size_t i = 0; i < needs.size(); ++i) needs[i] = node.inputs[i] >= 0;
    auto in_grads = node.fn(*slot, needs);
    slot.reset();
    for (std::size_t i = 0; i < node.inputs.size(); ++i) {
      if (!needs[i]) continue;
      const int src = node.inputs[i];
      if (in_grads.size() <= i || in_grads[i].shape() != nodes_[src].shape) {
        throw std::logic_error("backward produced a malformed gradient for input " +
                               std::to_string(i));
      }
      accumulate(grads[src], std::move(in_grads[i]));
    }
    node.fn = nullptr;
  }
  return out;
}

namespace {

Tape* tape_of(std::initializer_list<const Var*> vars) {
  for (const Var* v : vars) {
    if (v && v->tape) return v->tape;
  }
  return nullptr;
}

Var make(std::initializer_list<const Var*> inputs, Tensor value, BackwardFn fn) {
  Tape* tape = tape_of(inputs);
  if (!tape) return Var{nullptr, std::make_shared<const Tensor>(std::move(value)), -1};
  std::vector<Var> ins;
  for (const Var* v : inputs) ins.push_back(*v);
  return tape->record(std::move(value), ins, std::move(fn));
}

void same_shape(const char* op, const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

void need_rank(const char* op, const Var& a, std::size_t r) {
  if (a.v().rank() != r) {
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(r) +
                                " input, got " + shape_str(a.shape()));
  }
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  same_shape("add", a, b);
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = a.v()[i] + b.v()[i];
  return make({&a, &b}, std::move(y), [](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{g, g};
  });
}

Var sub(const Var& a, const Var& b) {
  same_shape("sub", a, b);
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = a.v()[i] - b.v()[i];
  return make({&a, &b}, std::move(y), [](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{g, map(g, [](float v) { return -v; })};
  });
}

Var mul(const Var& a, const Var& b) {
  const bool broadcast = b.v().numel() == 1 && a.shape() != b.shape();
  if (!broadcast) same_shape("mul", a, b);
  const auto av = a.value, bv = b.value;
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = (*av)[i] * (*bv)[broadcast ? 0 : i];
  return make({&a, &b}, std::move(y),
              [av, bv, broadcast](const Tensor& g, const std::vector<bool>& needs) {
                std::vector<Tensor> r(2);
                if (needs[0]) {
                  r[0] = Tensor(g.shape());
                  for (std::size_t i = 0; i < g.numel(); ++i)
                    r[0][i] = g[i] * (*bv)[broadcast ? 0 : i];
                }
                if (needs[1]) {
                  if (broadcast) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.numel(); ++i)
                      s += static_cast<double>(g[i]) * (*av)[i];
                    r[1] = Tensor(bv->shape(), static_cast<float>(s));
                  } else {
                    r[1] = Tensor(g.shape());
                    for (std::size_t i = 0; i < g.numel(); ++i) r[1][i] = g[i] * (*av)[i];
                  }
                }
                return r;
              });
}

Var scale(const Var& a, float s) {
  return make({&a}, map(a.v(), [s](float v) { return v * s; }),
              [s](const Tensor& g, const std::vector<bool>&) {
                return std::vector<Tensor>{map(g, [s](float v) { return v * s; })};
              });
}

Var add_scalar(const Var& a, float s) {
  return make({&a}, map(a.v(), [s](float v) { return v + s; }),
              [](const Tensor& g, const std::vector<bool>&) { return std::vector<Tensor>{g}; });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (float v : a.v().data()) s += v;
  const Shape shape = a.shape();
  return make({&a}, Tensor::scalar(static_cast<float>(s)),
              [shape](const Tensor& g, const std::vector<bool>&) {
                return std::vector<Tensor>{Tensor(shape, g[0])};
              });
}

Var mean(const Var& a) {
  const auto n = static_cast<float>(a.v().numel());
  return scale(sum(a), 1.0f / n);
}

Var square(const Var& a) { return mul(a, a); }

Var relu(const Var& a) {
  const auto av = a.value;
  return make({&a}, map(a.v(), [](float v) { return v > 0.0f ? v : 0.0f; }),
              [av](const Tensor& g, const std::vector<bool>&) {
                Tensor d(g.shape());
                for (std::size_t i = 0; i < g.numel(); ++i) d[i] = (*av)[i] > 0.0f ? g[i] : 0.0f;
                return std::vector<Tensor>{std::move(d)};
              });
}

Var tanh(const Var& a) {
  auto y = std::make_shared<Tensor>(map(a.v(), [](float v) { return std::tanh(v); }));
  Tensor out = *y;
  return make({&a}, std::move(out), [y](const Tensor& g, const std::vector<bool>&) {
    Tensor d(g.shape());
    for (std::size_t i = 0; i < g.numel(); ++i) d[i] = g[i] * (1.0f - (*y)[i] * (*y)[i]);
    return std::vector<Tensor>{std::move(d)};
  });
}

Var sigmoid(const Var& a, float steepness, float center) {
  const double s = steepness, c = center;
  auto y = std::make_shared<std::vector<double>>(a.v().numel());
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    (*y)[i] = 1.0 / (1.0 + std::exp(-s * (a.v()[i] - c)));
    out[i] = static_cast<float>((*y)[i]);
  }
  return make({&a}, std::move(out), [y, s](const Tensor& g, const std::vector<bool>&) {
    Tensor d(g.shape());
    for (std::size_t i = 0; i < g.numel(); ++i)
      d[i] = static_cast<float>(g[i] * s * (*y)[i] * (1.0 - (*y)[i]));
    return std::vector<Tensor>{std::move(d)};
  });
}

Var reshape(const Var& a, Shape shape) {
  const Shape original = a.shape();
  return make({&a}, a.v().reshaped(std::move(shape)),
              [original](const Tensor& g, const std::vector<bool>&) {
                return std::vector<Tensor>{g.reshaped(original)};
              });
}

Var matmul(const Var& a, const Var& b) {
  need_rank("matmul", a, 2);
  need_rank("matmul", b, 2);
  const auto av = a.value, bv = b.value;
  return make({&a, &b}, kernels::matmul(*av, *bv),
              [av, bv](const Tensor& g, const std::vector<bool>& needs) {
                const auto m = av->dim(0), k = av->dim(1), n = bv->dim(1);
                std::vector<Tensor> r(2);
                if (needs[0]) {
                  r[0] = Tensor({m, k});
                  const Tensor bt = kernels::transpose2d(*bv);
                  kernels::gemm(m, k, n, g.ptr(), n, 1, bt.ptr(), r[0].ptr());
                }
                if (needs[1]) {
                  r[1] = Tensor({k, n});
                  kernels::gemm(k, n, m, av->ptr(), 1, k, g.ptr(), r[1].ptr());
                }
                return r;
              });
}

Var linear(const Var& x, const Var& w, const Var* b) {
  need_rank("linear", x, 2);
  need_rank("linear", w, 2);
  if (x.v().dim(1) != w.v().dim(1)) {
    throw std::invalid_argument("linear: input " + shape_str(x.shape()) +
                                " does not match weight " + shape_str(w.shape()));
  }
  const auto n = x.v().dim(0), in = x.v().dim(1), out = w.v().dim(0);
  if (b && (b->v().rank() != 1 || b->v().dim(0) != out)) {
    throw std::invalid_argument("linear: bias " + shape_str(b->shape()) +
                                " does not match weight " + shape_str(w.shape()));
  }
  const auto xv = x.value, wv = w.value;
  Tensor y({n, out});
  const Tensor wt = kernels::transpose2d(*wv);
  kernels::gemm(n, out, in, xv->ptr(), in, 1, wt.ptr(), y.ptr());
  if (b) {
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < out; ++j) y[i * out + j] += b->v()[j];
  }
  BackwardFn fn = [xv, wv, n, in, out](const Tensor& g, const std::vector<bool>& needs) {
    std::vector<Tensor> r(needs.size());
    if (needs[0]) {
      r[0] = Tensor({n, in});
      kernels::gemm(n, in, out, g.ptr(), out, 1, wv->ptr(), r[0].ptr());
    }
    if (needs[1]) {
      r[1] = Tensor({out, in});
      kernels::gemm(out, in, n, g.ptr(), 1, out, xv->ptr(), r[1].ptr());
    }
    if (needs.size() > 2 && needs[2]) {
      r[2] = Tensor({out});
      for (std::int64_t j = 0; j < out; ++j) {
        double s = 0.0;
        for (std::int64_t i = 0; i < n; ++i) s += g[i * out + j];
        r[2][j] = static_cast<float>(s);
      }
    }
    return r;
  };
  if (b) return make({&x, &w, b}, std::move(y), std::move(fn));
  return make({&x, &w}, std::move(y), std::move(fn));
}

Var conv2d(const Var& x, const Var& w, const kernels::Conv2dAttrs& attrs) {
  const auto xv = x.value, wv = w.value;
  return make({&x, &w}, kernels::conv2d(*xv, *wv, attrs),
              [xv, wv, attrs](const Tensor& g, const std::vector<bool>& needs) {
                std::vector<Tensor> r(2);
                if (needs[0]) r[0] = kernels::conv2d_grad_input(g, *wv, xv->shape(), attrs);
                if (needs[1]) r[1] = kernels::conv2d_grad_weight(g, *xv, wv->shape(), attrs);
                return r;
              });
}

Var add_channel_bias(const Var& x, const Var& b) {
  need_rank("add_channel_bias", x, 4);
  const auto n = x.v().dim(0), c = x.v().dim(1), plane = x.v().dim(2) * x.v().dim(3);
  if (b.v().rank() != 1 || b.v().dim(0) != c) {
    throw std::invalid_argument("add_channel_bias: bias " + shape_str(b.shape()) +
                                " does not match input " + shape_str(x.shape()));
  }
  Tensor y = x.v();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t p = 0; p < plane; ++p) y[(i * c + ch) * plane + p] += b.v()[ch];
  return make({&x, &b}, std::move(y),
              [n, c, plane](const Tensor& g, const std::vector<bool>& needs) {
                std::vector<Tensor> r(2);
                if (needs[0]) r[0] = g;
                if (needs[1]) {
                  r[1] = Tensor({c});
                  for (std::int64_t ch = 0; ch < c; ++ch) {
                    double s = 0.0;
                    for (std::int64_t i = 0; i < n; ++i)
                      for (std::int64_t p = 0; p < plane; ++p) s += g[(i * c + ch) * plane + p];
                    r[1][ch] = static_cast<float>(s);
                  }
                }
                return r;
              });
}

Var batchnorm_inference(const Var& x, const Var& gamma, const Var& beta, const Tensor& mean,
                        const Tensor& var, float eps) {
  if (x.v().rank() != 4 && x.v().rank() != 2) {
    throw std::invalid_argument("batchnorm: expected rank 2 or 4 input, got " +
                                shape_str(x.shape()));
  }
  const auto n = x.v().dim(0), c = x.v().dim(1);
  const std::int64_t plane = x.v().rank() == 4 ? x.v().dim(2) * x.v().dim(3) : 1;
  for (const Tensor* t : {&gamma.v(), &beta.v(), &mean, &var}) {
    if (t->rank() != 1 || t->dim(0) != c) {
      throw std::invalid_argument("batchnorm: parameter " + shape_str(t->shape()) +
                                  " does not match input " + shape_str(x.shape()));
    }
  }
  auto inv_sd = std::make_shared<std::vector<double>>(c);
  for (std::int64_t ch = 0; ch < c; ++ch) (*inv_sd)[ch] = 1.0 / std::sqrt(var[ch] + eps);
  auto xhat = std::make_shared<Tensor>(x.shape());
  Tensor y(x.shape());
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t p = 0; p < plane; ++p) {
        const auto idx = (i * c + ch) * plane + p;
        const double h = (x.v()[idx] - mean[ch]) * (*inv_sd)[ch];
        (*xhat)[idx] = static_cast<float>(h);
        y[idx] = static_cast<float>(gamma.v()[ch] * h + beta.v()[ch]);
      }
  const auto gv = gamma.value;
  return make({&x, &gamma, &beta}, std::move(y),
              [=](const Tensor& g, const std::vector<bool>& needs) {
                std::vector<Tensor> r(3);
                if (needs[0]) {
                  r[0] = Tensor(g.shape());
                  for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                      const double f = (*gv)[ch] * (*inv_sd)[ch];
                      for (std::int64_t p = 0; p < plane; ++p) {
                        const auto idx = (i * c + ch) * plane + p;
                        r[0][idx] = static_cast<float>(g[idx] * f);
                      }
                    }
                }
                if (needs[1] || needs[2]) {
                  std::vector<double> dg(c, 0.0), db(c, 0.0);
                  for (std::int64_t i = 0; i < n; ++i)
                    for (std::int64_t ch = 0; ch < c; ++ch)
                      for (std::int64_t p = 0; p < plane; ++p) {
                        const auto idx = (i * c + ch) * plane + p;
                        dg[ch] += static_cast<double>(g[idx]) * (*xhat)[idx];
                        db[ch] += g[idx];
                      }
                  r[1] = Tensor({c});
                  r[2] = Tensor({c});
                  for (std::int64_t ch = 0; ch < c; ++ch) {
                    r[1][ch] = static_cast<float>(dg[ch]);
                    r[2][ch] = static_cast<float>(db[ch]);
                  }
                }
                return r;
              });
}

Var mean_pool(const Var& x, int k) {
  const Shape xs = x.shape();
  return make({&x}, kernels::mean_pool(x.v(), k),
              [xs, k](const Tensor& g, const std::vector<bool>&) {
                return std::vector<Tensor>{kernels::mean_pool_grad(g, xs, k)};
              });
}

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
  need_rank("softmax_cross_entropy", logits, 2);
  const auto n = logits.v().dim(0), k = logits.v().dim(1);
  if (static_cast<std::int64_t>(labels.size()) != n) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for logits " + shape_str(logits.shape()));
  }
  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n * k));
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= k) {
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(y) +
                                  " out of range for " + std::to_string(k) + " classes");
    }
    const float* row = logits.v().ptr() + i * k;
    double mx = row[0];
    for (std::int64_t j = 1; j < k; ++j) mx = std::max<double>(mx, row[j]);
    double z = 0.0;
    for (std::int64_t j = 0; j < k; ++j) {
      const double e = std::exp(row[j] - mx);
      (*probs)[i * k + j] = e;
      z += e;
    }
    for (std::int64_t j = 0; j < k; ++j) (*probs)[i * k + j] /= z;
    total += -(row[y] - mx - std::log(z));
  }
  auto lab = std::make_shared<std::vector<int>>(labels);
  return make({&logits}, Tensor::scalar(static_cast<float>(total / n)),
              [probs, lab, n, k](const Tensor& g, const std::vector<bool>&) {
                Tensor d({n, k});
                const double s = g[0] / static_cast<double>(n);
                for (std::int64_t i = 0; i < n; ++i)
                  for (std::int64_t j = 0; j < k; ++j) {
                    const double t = (j == (*lab)[i]) ? 1.0 : 0.0;
                    d[i * k + j] = static_cast<float>(s * ((*probs)[i * k + j] - t));
                  }
                return std::vector<Tensor>{std::move(d)};
              });
}

Var row_scale(const Var& x, const Var& s, std::int64_t repeat) {
  need_rank("row_scale", x, 2);
  const auto rows = x.v().dim(0), cols = x.v().dim(1);
  if (repeat < 1 || s.v().rank() != 1 || s.v().dim(0) * repeat != rows) {
    throw std::invalid_argument("row_scale: scale " + shape_str(s.shape()) + " x" +
                                std::to_string(repeat) + " does not cover matrix " +
                                shape_str(x.shape()));
  }
  const auto xv = x.value, sv = s.value;
  Tensor y(x.shape());
  for (std::int64_t r = 0; r < rows; ++r) {
    const float f = (*sv)[r / repeat];
    for (std::int64_t c = 0; c < cols; ++c) y[r * cols + c] = (*xv)[r * cols + c] * f;
  }
  return make({&x, &s}, std::move(y),
              [xv, sv, rows, cols, repeat](const Tensor& g, const std::vector<bool>& needs) {
                std::vector<Tensor> r(2);
                if (needs[0]) {
                  r[0] = Tensor(g.shape());
                  for (std::int64_t i = 0; i < rows; ++i)
                    for (std::int64_t c = 0; c < cols; ++c)
                      r[0][i * cols + c] = g[i * cols + c] * (*sv)[i / repeat];
                }
                if (needs[1]) {
                  std::vector<double> acc(sv->numel(), 0.0);
                  for (std::int64_t i = 0; i < rows; ++i)
                    for (std::int64_t c = 0; c < cols; ++c)
                      acc[i / repeat] +=
                          static_cast<double>(g[i * cols + c]) * (*xv)[i * cols + c];
                  r[1] = Tensor(sv->shape());
                  for (std::size_t j = 0; j < acc.size(); ++j)
                    r[1][j] = static_cast<float>(acc[j]);
                }
                return r;
              });
}

Var matricize(const Var& w, const linalg::MatricizationSpec& spec) {
  if (w.shape() != spec.original_shape) {
    throw std::invalid_argument("matricize: tensor " + shape_str(w.shape()) +
                                " does not match spec shape " + shape_str(spec.original_shape));
  }
  auto index = std::make_shared<std::vector<std::int64_t>>(linalg::matricize_index(spec));
  Tensor m({spec.rows(), spec.cols()});
  for (std::size_t p = 0; p < index->size(); ++p) m[p] = w.v()[(*index)[p]];
  const Shape ws = w.shape();
  return make({&w}, std::move(m), [index, ws](const Tensor& g, const std::vector<bool>&) {
    Tensor d(ws);
    for (std::size_t p = 0; p < index->size(); ++p) d[(*index)[p]] = g[p];
    return std::vector<Tensor>{std::move(d)};
  });
}

Var dematricize(const Var& m, const linalg::MatricizationSpec& spec) {
  if (m.shape() != Shape{spec.rows(), spec.cols()}) {
    throw std::invalid_argument("dematricize: matrix " + shape_str(m.shape()) +
                                " does not match spec shape " + shape_str(spec.original_shape));
  }
  auto index = std::make_shared<std::vector<std::int64_t>>(linalg::matricize_index(spec));
  Tensor w(spec.original_shape);
  for (std::size_t p = 0; p < index->size(); ++p) w[(*index)[p]] = m.v()[p];
  const Shape ms = m.shape();
  return make({&m}, std::move(w), [index, ms](const Tensor& g, const std::vector<bool>&) {
    Tensor d(ms);
    for (std::size_t p = 0; p < index->size(); ++p) d[p] = g[(*index)[p]];
    return std::vector<Tensor>{std::move(d)};
  });
}

Var svt(const Var& x, const Var& gamma, const SvtNodeOptions& options,
        std::vector<double>* spectrum) {
  need_rank("svt", x, 2);
  if (gamma.v().numel() != 1) {
    throw std::invalid_argument("svt: threshold must be a single value, got shape " +
                                shape_str(gamma.shape()));
  }
  const double g = gamma.v()[0];
  auto factors = std::make_shared<linalg::SvdFactors>(
      linalg::thin_svd(linalg::Matrix::from_tensor(x.v())));
  if (spectrum) *spectrum = factors->singular_values;
  Tensor y = linalg::svt(*factors, g).to_tensor();
  const Shape gs = gamma.shape();
  return make({&x, &gamma}, std::move(y),
              [factors, g, gs, options](const Tensor& up, const std::vector<bool>& needs) {
                auto grad = linalg::svt_vjp(*factors, g, linalg::Matrix::from_tensor(up),
                                            options.vjp);
                std::vector<Tensor> r(2);
                if (needs[0]) r[0] = grad.dx.to_tensor();
                if (needs[1]) r[1] = Tensor(gs, static_cast<float>(grad.dgamma));
                return r;
              });
}

}  // namespace dfc::ad
