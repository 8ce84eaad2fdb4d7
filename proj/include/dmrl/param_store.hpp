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

#ifndef DMRL_PARAM_STORE_H_
#define DMRL_PARAM_STORE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dmrl/tensor.hpp"

namespace dmrl {

// Named parameter tensors. std::map keeps iteration order deterministic
// (lexicographic), which checkpointing and checksums rely on.
struct ParamStore {
  std::map<std::string, Tensor> entries;
  uint64_t rng_seed = 0;

  Tensor& add(const std::string& name, std::vector<int64_t> shape);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return entries.count(name) != 0; }

  int64_t total_scalars() const;
  // FNV-1a over names and raw value bytes; order is the map order.
  uint64_t checksum() const;
  // Checksum restricted to names for which `keep` returns true.
  uint64_t checksum_if(const std::function<bool(const std::string&)>& keep) const;
};

// Gradient accumulator keyed like ParamStore. Accumulation is additive.
struct GradStore {
  std::map<std::string, Tensor> entries;

  Tensor& lazy(const std::string& name, const std::vector<int64_t>& shape);
  void accum(const std::string& name, const Tensor& g);
  void add_scaled(const GradStore& other, double a);
  void scale(double a);
  double global_norm() const;
  bool all_finite() const;
  void clear() { entries.clear(); }
};

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace dmrl

#endif  // DMRL_PARAM_STORE_H_
