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

#ifndef DMRL_MLP_H_
#define DMRL_MLP_H_

#include <cmath>
#include <string>
#include <vector>

#include "dmrl/lora.hpp"
#include "dmrl/param_store.hpp"
#include "dmrl/rng.hpp"

namespace dmrl::nn {

// Which parameters receive gradients.
enum class TrainMode {
  kFull,      // base weights and biases (plus adapters when present)
  kLoraOnly,  // adapter A/B only; backbone frozen
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

// Named dense layer y = W x + b, with an optional low-rank delta
//   y += (alpha/r) B (A x).
// Parameters live in a ParamStore owned by the caller; the layer itself only
// carries names and dimensions, so forward/backward are pure in the params.
struct Linear {
  std::string w_name, b_name;
  int in = 0, out = 0;

  Linear() = default;
  Linear(std::string prefix, int in_dim, int out_dim)
      : w_name(prefix + ".W"), b_name(prefix + ".b"), in(in_dim), out(out_dim) {}

  // Gaussian W with std 1/sqrt(in) (or zeros), zero b.
  void init(ParamStore& ps, Rng& rng, bool zero_init = false) const;

  // ax_cache must hold rank doubles when an adapter is attached (may be null
  // otherwise). Writes out doubles to y.
  void forward(const ParamStore& ps, const LoraAdapter* ad, const double* x, double* y,
               double* ax_cache) const;

  // Accumulates parameter grads into gs per mode and adds W_eff^T gy into
  // gx_add when non-null. x/ax_cache must match the forward call.
  void backward(const ParamStore& ps, const LoraAdapter* ad, const double* x,
                const double* ax_cache, const double* gy, TrainMode mode, GradStore& gs,
                double* gx_add) const;
};

// One stage of a feed-forward stack.
//   kPlain:    y = act(W x + b)          (act optional)
//   kResidual: y = x + fc2(silu(fc1 x))  (widths preserved)
struct Stage {
  enum Kind { kPlain, kResidual } kind = kPlain;
  Linear lin;   // kPlain
  bool act = true;
  Linear fc1, fc2;  // kResidual

  static Stage plain(std::string prefix, int in, int out, bool with_act) {
    Stage s;
    s.kind = kPlain;
    s.lin = Linear(std::move(prefix), in, out);
    s.act = with_act;
    return s;
  }
  static Stage residual(const std::string& prefix, int width, int inner) {
    Stage s;
    s.kind = kResidual;
    s.fc1 = Linear(prefix + ".fc1", width, inner);
    s.fc2 = Linear(prefix + ".fc2", inner, width);
    return s;
  }
  int in_dim() const { return kind == kPlain ? lin.in : fc1.in; }
  int out_dim() const { return kind == kPlain ? lin.out : fc2.out; }
};

struct StageCache {
  std::vector<double> x_in;  // stage input
  std::vector<double> u;     // pre-activation (plain) or fc1 output (residual)
  std::vector<double> s;     // silu(u) for residual stages
  std::vector<double> ax1, ax2;  // adapter caches
};

struct MlpCache {
  std::vector<StageCache> stages;
  std::vector<double> out;
};

// Fixed sequential stack over a ParamStore. Construction freezes the layer
// spec; forward/backward validate shapes against it.
struct Mlp {
  std::vector<Stage> stages;

  void init(ParamStore& ps, Rng& rng, bool zero_last = false) const;
  int in_dim() const { return stages.front().in_dim(); }
  int out_dim() const { return stages.back().out_dim(); }

  // Deterministic forward; cache (optional) holds everything backward needs.
  std::vector<double> forward(const ParamStore& ps, const LoraSet* lora, const double* x,
                              MlpCache* cache) const;

  // grad_out has out_dim entries; returns grad wrt the input. Parameter grads
  // accumulate into gs.
  std::vector<double> backward(const ParamStore& ps, const LoraSet* lora, const MlpCache& cache,
                               const double* grad_out, TrainMode mode, GradStore& gs) const;

  std::vector<std::string> weight_names() const;
};

// Mean of embedding-table rows selected by ids; table is vocab x dim.
void embed_mean_pool(const Tensor& table, const int32_t* ids, int count, double* out);
// Scatters gpool/count into the grad rows of the pooled ids.
void embed_mean_pool_backward(const std::string& table_name, const Tensor& table,
                              const int32_t* ids, int count, const double* gpool, GradStore& gs);

// y = z / ||z||; returns the norm. Backward maps gy to gz.
double l2_normalize(const double* z, int n, double* y);
void l2_normalize_backward(const double* z, int n, const double* gy, double* gz);

}  // namespace dmrl::nn

#endif  // DMRL_MLP_H_
