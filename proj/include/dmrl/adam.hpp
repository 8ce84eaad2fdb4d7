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

#ifndef DMRL_ADAM_H_
#define DMRL_ADAM_H_

#include <map>
#include <string>
#include <vector>

#include "dmrl/param_store.hpp"

namespace dmrl {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::map<std::string, Tensor> m, v;
  int64_t step = 0;
};

// Mutable views into the trainable tensors, by name.
using ParamRefs = std::vector<std::pair<std::string, Tensor*>>;

ParamRefs refs_of(ParamStore& ps);

// Standard Adam with bias correction. Only names present in `grads` are
// touched; everything else is left bit-for-bit unchanged. Throws on
// non-finite gradients (the step is rejected before any mutation).
void adam_step(const ParamRefs& params, const GradStore& grads, AdamState& state,
               const AdamConfig& cfg);

// Scales grads in place so the global L2 norm is at most max_norm.
// Returns the pre-clip norm.
double clip_global_norm(GradStore& grads, double max_norm);

}  // namespace dmrl

#endif  // DMRL_ADAM_H_
