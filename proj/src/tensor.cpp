// Copyright 2026 The DMRL Authors
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

#include "dmrl/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dmrl {

Tensor::Tensor(std::vector<int64_t> s)
    : shape(std::move(s)), data(static_cast<size_t>(numel_of(shape)), 0.0) {}

Tensor::Tensor(std::vector<int64_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (numel_of(shape) != static_cast<int64_t>(data.size())) {
    throw std::runtime_error("Tensor: shape/data size mismatch");
  }
}

int64_t Tensor::numel_of(const std::vector<int64_t>& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d < 0) throw std::runtime_error("Tensor: negative dimension");
    n *= d;
  }
  return n;
}

Tensor Tensor::full(std::vector<int64_t> s, double v) {
  Tensor t(std::move(s));
  for (double& x : t.data) x = v;
  return t;
}

int64_t Tensor::rows() const {
  if (shape.size() != 2) throw std::runtime_error("Tensor: rows() needs 2-D, got " + shape_str());
  return shape[0];
}

int64_t Tensor::cols() const {
  if (shape.size() != 2) throw std::runtime_error("Tensor: cols() needs 2-D, got " + shape_str());
  return shape[1];
}

double& Tensor::at2(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
double Tensor::at2(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * cols() + c)]; }

bool Tensor::all_finite() const {
  for (double x : data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Tensor::require_finite(const std::string& what) const {
  if (!all_finite()) throw std::runtime_error("non-finite values in " + what);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << "]";
  return os.str();
}

}  // namespace dmrl
