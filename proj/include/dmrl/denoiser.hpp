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

#ifndef DMRL_DENOISER_H_
#define DMRL_DENOISER_H_

#include <string>
#include <vector>

#include "dmrl/mlp.hpp"
#include "dmrl/prompts.hpp"
#include "dmrl/synthworld.hpp"

namespace dmrl::diff {

// Sinusoidal embedding; t may be continuous.
std::vector<double> time_embedding(double t, int dim);

struct DenoiserConfig {
  int hidden = 96;
  int blocks = 2;
  int token_emb = 32;
  int time_emb = 32;
  int vocab = 0;  // 0 = from the global vocabulary
  int motion_dim = world::kMotionDim;

  int cond_dim() const { return token_emb + time_emb; }
};

// Epsilon-predicting conditional denoiser:
//   h   = silu(stem(x) + cond(concat(pool(tokens), time_emb(t))))
//   h   = residual blocks (h + fc2(silu(fc1 h)))
//   eps = head(h) + gate(t) * x
// head and gate are zero-initialized, so the fresh model predicts 0. The
// time-dependent scalar gate carries the full-rank direct path that epsilon
// prediction needs at high noise; the trunk handles the structured part.
// The unconditional branch is selected by the reserved all-<null> prompt.
// The class only holds the architecture; parameters live in a ParamStore so
// forward/backward are pure given (params, adapters, inputs).
class Denoiser {
 public:
  explicit Denoiser(DenoiserConfig cfg);

  const DenoiserConfig& config() const { return cfg_; }
  void init_params(ParamStore& ps, Rng& rng) const;

  // 2-D weights that receive low-rank adapters: the conditioning projection
  // and every residual-block linear map.
  std::vector<std::string> lora_targets() const;
  LoraSet make_lora(const ParamStore& ps, int rank, double alpha, Rng& rng) const;
  bool is_lora_param(const std::string& name) const;

  struct Cache {
    std::vector<double> x;
    world::PromptTokens tokens;
    std::vector<double> pool, cond_in;
    std::vector<double> temb;
    double gate = 0.0;
    std::vector<double> pre;  // stem(x) + cond(cv), before silu
    std::vector<double> h0;
    std::vector<double> cond_ax;
    nn::MlpCache trunk;
  };

  Tensor forward(const ParamStore& ps, const LoraSet* lora, const Tensor& x_t, double t,
                 const world::PromptTokens& tokens, Cache* cache) const;

  // Accumulates into gs; grad_input (motion_dim) is written when non-null.
  void backward(const ParamStore& ps, const LoraSet* lora, const Cache& cache,
                const Tensor& grad_eps, nn::TrainMode mode, GradStore& gs,
                double* grad_input = nullptr) const;

 private:
  DenoiserConfig cfg_;
  nn::Linear stem_, cond_, head_;
  nn::Mlp trunk_;
};

}  // namespace dmrl::diff

#endif  // DMRL_DENOISER_H_
