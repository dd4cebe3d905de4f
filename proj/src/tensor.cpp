// Copyright 2026 The dfcompress Authors
// SPDX-License-Identifier: Apache-2.0

#include "dfc/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dfc {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d <= 0) {
      throw std::invalid_argument("tensor shape " + shape_str(shape) +
                                  " has a non-positive dimension");
    }
    if (n > std::numeric_limits<std::int64_t>::max() / d) {
      throw std::invalid_argument("tensor shape " + shape_str(shape) + " overflows");
    }
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)),
      data_(static_cast<std::size_t>(shape_numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (static_cast<std::size_t>(shape_numel(shape_)) != data_.size()) {
    throw std::invalid_argument("tensor shape " + shape_str(shape_) + " needs " +
                                std::to_string(shape_numel(shape_)) +
                                " values, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::scalar(float value) { return Tensor(Shape{}, std::vector<float>{value}); }

Tensor Tensor::checked(Shape shape, std::vector<float> data) {
  Tensor t(std::move(shape), std::move(data));
  if (!t.all_finite()) {
    throw std::invalid_argument("tensor " + shape_str(t.shape()) +
                                " contains non-finite values");
  }
  return t;
}

float Tensor::item() const {
  if (data_.size() != 1) {
    throw std::invalid_argument("item() on tensor of shape " + shape_str(shape_));
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (static_cast<std::size_t>(shape_numel(shape)) != data_.size()) {
    throw std::invalid_argument("cannot reshape " + shape_str(shape_) + " to " +
                                shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("max_abs_diff: shape " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

bool bit_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         (a.numel() == 0 ||
          std::memcmp(a.ptr(), b.ptr(), a.numel() * sizeof(float)) == 0);
}

}  // namespace dfc
