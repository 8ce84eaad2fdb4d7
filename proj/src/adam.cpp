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

#include "dmrl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dmrl {

ParamRefs refs_of(ParamStore& ps) {
  ParamRefs refs;
  refs.reserve(ps.entries.size());
  for (auto& [name, t] : ps.entries) refs.emplace_back(name, &t);
  return refs;
}

void adam_step(const ParamRefs& params, const GradStore& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (!grads.all_finite()) throw std::runtime_error("adam_step: non-finite gradients, step rejected");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (const auto& [name, g] : grads.entries) {
    Tensor* p = nullptr;
    for (const auto& [pname, pt] : params) {
      if (pname == name) {
        p = pt;
        break;
      }
    }
    if (p == nullptr) throw std::runtime_error("adam_step: grad for unknown parameter " + name);
    if (!p->same_shape(g)) throw std::runtime_error("adam_step: shape mismatch for " + name);
    auto mit = state.m.find(name);
    if (mit == state.m.end()) {
      mit = state.m.emplace(name, Tensor(g.shape)).first;
      state.v.emplace(name, Tensor(g.shape));
    }
    Tensor& m = mit->second;
    Tensor& v = state.v.at(name);
    for (int64_t i = 0; i < g.numel(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mh = m[i] / bc1;
      const double vh = v[i] / bc2;
      (*p)[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
}

double clip_global_norm(GradStore& grads, double max_norm) {
  const double norm = grads.global_norm();
  if (norm > max_norm && norm > 0.0) grads.scale(max_norm / norm);
  return norm;
}

}  // namespace dmrl
