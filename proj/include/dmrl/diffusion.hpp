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

#ifndef DMRL_DIFFUSION_H_
#define DMRL_DIFFUSION_H_

#include <functional>
#include <vector>

#include "dmrl/denoiser.hpp"
#include "dmrl/schedule.hpp"

namespace dmrl::diff {

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise, exactly.
Tensor forward_noise(const Tensor& x0, int t, const Tensor& noise, const NoiseSchedule& s);

// eps_hat = eps_uncond + scale (eps_cond - eps_uncond), evaluated as
// (1-scale) eps_uncond + scale eps_cond so the scale-0/1 identities are exact.
Tensor cfg_predict(const Tensor& eps_cond, const Tensor& eps_uncond, double scale);

// Noise prediction source; tests inject analytic closures, the real model
// wraps a Denoiser. tokens is the conditioning (the reserved null prompt
// selects the unconditional branch).
using EpsFn = std::function<Tensor(const Tensor& x, double t, double abar,
                                   const world::PromptTokens& tokens)>;

EpsFn make_eps_fn(const Denoiser& model, const ParamStore& ps, const LoraSet* lora);

// Guidance-combined prediction for a fixed prompt.
struct Guided {
  EpsFn fn;
  world::PromptTokens cond;
  double scale = 1.0;

  Tensor eps(const Tensor& x, double t, double abar) const;
};

// One reverse transition: N(mean, sigma^2 I) with schedule-fixed sigma.
struct StepDistribution {
  Tensor mean;
  double sigma = 0.0;
};

// Posterior over transition k of the chain (k indexes chain.t).
StepDistribution posterior_params(const Guided& model, const Tensor& x_t, int k,
                                  const SamplingChain& chain);

// Mean of the transition given a noise prediction. Shared by sampling and by
// likelihood recomputation so stored and recomputed log-densities agree
// bit-for-bit when parameters are unchanged.
Tensor posterior_mean_from_eps(const Tensor& x_t, const Tensor& eps_hat,
                               const SamplingChain& chain, int k);

// Joint log-density of x under N(mean, sigma^2 I), summed over coordinates.
double gaussian_logp(const Tensor& x, const Tensor& mean, double sigma);

struct StepResult {
  Tensor x_prev;
  double logp = 0.0;
};
StepResult step_sample(const StepDistribution& dist, Rng& rng);

struct StepRecord {
  int t = 0;          // parent timestep of the source level
  Tensor x_t, x_prev;
  double logp_old = 0.0;
};

// Full denoising chain. The terminal reward and its advantage are attached
// after collection; intermediate steps never carry reward.
struct DiffusionTrajectory {
  world::PromptTokens prompt;
  std::vector<StepRecord> steps;  // descending t when recorded
  Tensor x0;
  double reward = 0.0;
  double advantage = 0.0;
};

// Ancestral sampling from x_T ~ N(0, I) down the chain. With record set, one
// StepRecord per transition (so steps() records in total).
DiffusionTrajectory sample_ancestral(const Guided& model, const SamplingChain& chain, Rng& rng,
                                     bool record);

// Deterministic second-order multistep solver in data prediction over a
// uniform log-SNR grid; the first knot takes a first-order step. The grid
// runs past the schedule's cleanest level so the output is essentially
// noise-free. Deterministic given x_start.
Tensor sample_fast(const Guided& model, const NoiseSchedule& schedule, int steps,
                   const Tensor& x_start);
Tensor sample_fast(const Guided& model, const NoiseSchedule& schedule, int steps, Rng& rng);

struct PretrainConfig {
  int iters = 4000;
  int batch = 64;
  double lr = 1e-3;
  double p_uncond = 0.1;
  int eval_every = 500;
  int log_every = 100;
};

struct PretrainResult {
  double final_train_loss = 0.0;
  double eval_mse = 0.0;  // per-coordinate, on the eval split
};

// Standard epsilon-prediction MSE training with prompt dropout for the
// unconditional branch. Aborts with an error if the loss turns non-finite.
PretrainResult pretrain(const Denoiser& model, ParamStore& ps, const world::MotionSplit& train,
                        const world::MotionSplit& eval_split, const NoiseSchedule& schedule,
                        const PretrainConfig& cfg, Rng& rng,
                        const std::function<void(int, double)>& on_log = nullptr);

// Per-coordinate epsilon MSE on a fixed draw of (t, noise) per record.
double eval_eps_mse(const Denoiser& model, const ParamStore& ps, const LoraSet* lora,
                    const world::MotionSplit& split, const NoiseSchedule& schedule, Rng rng);

}  // namespace dmrl::diff

#endif  // DMRL_DIFFUSION_H_
