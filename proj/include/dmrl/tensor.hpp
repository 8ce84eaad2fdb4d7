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

#ifndef DMRL_TENSOR_H_
#define DMRL_TENSOR_H_

#include <cstdint>
#include <string>
#include <vector>

namespace dmrl {

// Dense row-major tensor of doubles. All shapes in this project are small
// (vectors, weight matrices, 32x6 motion frames), so there is no striding,
// no views, no reference counting.
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s);
  Tensor(std::vector<int64_t> s, std::vector<double> d);

  static int64_t numel_of(const std::vector<int64_t>& s);
  static Tensor zeros(std::vector<int64_t> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int64_t> s, double v);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int64_t rows() const;  // first dim of a 2-D tensor
  int64_t cols() const;  // second dim of a 2-D tensor

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }
  double& at2(int64_t r, int64_t c);
  double at2(int64_t r, int64_t c) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  // Throws std::runtime_error naming `what` if any element is NaN/Inf.
  void require_finite(const std::string& what) const;

  std::string shape_str() const;
};

}  // namespace dmrl

#endif  // DMRL_TENSOR_H_
