// Copyright 2026 The sparsesep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sparsesep/error.hpp"

namespace sparsesep {

/// Dense (channels x rows x cols) tensor, row-major with channel outermost.
/// Spectral images use rows = frequency bins and cols = time frames.
struct Tensor3 {
  std::size_t channels = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Tensor3() = default;
  Tensor3(std::size_t c, std::size_t r, std::size_t t) : channels(c), rows(r), cols(t), values(c * r * t, 0.0) {}

  std::size_t size() const { return values.size(); }
  double& operator()(std::size_t c, std::size_t r, std::size_t t) { return values[(c * rows + r) * cols + t]; }
  double operator()(std::size_t c, std::size_t r, std::size_t t) const { return values[(c * rows + r) * cols + t]; }

  bool same_shape(const Tensor3& o) const { return channels == o.channels && rows == o.rows && cols == o.cols; }

  double squared_norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return s;
  }

  Tensor3& operator*=(double s) {
    for (double& v : values) v *= s;
    return *this;
  }

  Tensor3& operator+=(const Tensor3& o) {
    require(same_shape(o), ErrorKind::kShape, "tensor add: shape mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += o.values[i];
    return *this;
  }

  Tensor3& operator-=(const Tensor3& o) {
    require(same_shape(o), ErrorKind::kShape, "tensor subtract: shape mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) values[i] -= o.values[i];
    return *this;
  }
};

inline Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
inline Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
inline Tensor3 operator*(double s, Tensor3 a) { return a *= s; }

}  // namespace sparsesep
