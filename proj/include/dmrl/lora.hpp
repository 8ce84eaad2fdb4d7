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

#ifndef DMRL_LORA_H_
#define DMRL_LORA_H_

#include <string>
#include <vector>

#include "dmrl/param_store.hpp"
#include "dmrl/rng.hpp"
#include "dmrl/tensor.hpp"

namespace dmrl {

// Low-rank delta for a frozen 2-D weight W (d_out x d_in):
//   W_eff = W + (alpha / rank) * B A
// A is rank x d_in (Gaussian init, sigma 0.01), B is d_out x rank (zero init),
// so a fresh adapter leaves the backbone output untouched.
struct LoraAdapter {
  std::string target;
  Tensor A;  // rank x d_in
  Tensor B;  // d_out x rank
  int rank = 0;
  double alpha = 0.0;

  static LoraAdapter init(const std::string& target, int64_t d_out, int64_t d_in, int rank,
                          double alpha, Rng& rng);

  double scale() const { return alpha / rank; }
  int64_t d_in() const { return A.cols(); }
  int64_t d_out() const { return B.rows(); }
  int64_t trainable_scalars() const { return static_cast<int64_t>(rank) * (d_in() + d_out()); }
  std::string a_name() const { return target + ".lora_A"; }
  std::string b_name() const { return target + ".lora_B"; }
};

struct LoraSet {
  std::vector<LoraAdapter> adapters;

  const LoraAdapter* find(const std::string& target) const;
  LoraAdapter* find(const std::string& target);
  int64_t trainable_scalars() const;
  uint64_t checksum() const;
  bool all_b_zero() const;
};

// W' = W + (alpha/rank) B A for the adapter target; other entries copied.
ParamStore lora_merge(const ParamStore& params, const LoraAdapter& ad);
ParamStore lora_merge(const ParamStore& params, const LoraSet& set);
// Inverse of lora_merge (up to floating rounding).
ParamStore lora_unmerge(const ParamStore& params, const LoraAdapter& ad);

}  // namespace dmrl

#endif  // DMRL_LORA_H_
