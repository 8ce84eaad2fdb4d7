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

#ifndef DMRL_DDPO_H_
#define DMRL_DDPO_H_

#include <functional>
#include <string>
#include <vector>

#include "dmrl/adam.hpp"
#include "dmrl/diffusion.hpp"
#include "dmrl/reward.hpp"

namespace dmrl::ddpo {

// On-policy buffer of full denoising chains; refilled wholesale by each
// collection phase and reused across update epochs only.
struct ReplayBuffer {
  std::vector<diff::DiffusionTrajectory> trajectories;
  int capacity = 256;
  int replicas = 4;

  double mean_reward() const;
  double std_reward() const;
};

struct DdpoConfig {
  int n_prompts = 64;
  int replicas = 4;
  int update_epochs = 4;
  double clip_eps = 1e-4;
  double lr = 1e-3;
  int minibatch = 256;
  int max_iterations = 300;
  double grad_clip = 1.0;
  double kl_guard = 0.05;
  double cfg_scale = 2.5;
  int checkpoint_every = 50;

  int capacity() const { return n_prompts * replicas; }
  void validate() const;
};

// The policy under optimization: frozen backbone + live adapters.
struct PolicyContext {
  const diff::Denoiser* model = nullptr;
  const ParamStore* params = nullptr;
  LoraSet* lora = nullptr;
};

struct CollectStats {
  int resampled = 0;  // non-finite trajectories dropped and redrawn
};

using RewardFn = std::function<double(const Tensor& x0, const world::PromptTokens& tokens)>;

// Samples n_prompts distinct prompts x replicas trajectories on the RL chain,
// recording every transition and the terminal reward. Model parameters are
// untouched; the reward encoder must be frozen.
ReplayBuffer collect(const PolicyContext& policy, const reward::DualEncoder& reward_enc,
                     const world::PromptOnlySplit& prompts, const DdpoConfig& cfg,
                     const diff::SamplingChain& chain, const Rng& root, uint64_t iter,
                     CollectStats* stats = nullptr);
// General form with an arbitrary terminal reward.
ReplayBuffer collect(const PolicyContext& policy, const RewardFn& reward_fn,
                     const world::PromptOnlySplit& prompts, const DdpoConfig& cfg,
                     const diff::SamplingChain& chain, const Rng& root, uint64_t iter,
                     CollectStats* stats = nullptr);

// Per-prompt normalization over the replicas of each sampled prompt:
//   A = (r - mean) / (std + 1e-6), constant across the trajectory's steps.
void compute_advantages(ReplayBuffer& buffer);

// w = exp(clamp(logp_new - logp_old, -20, 20)).
double importance_weight(double logp_new, double logp_old);

struct LossTerm {
  double loss = 0.0;     // -min(w A, clip(w) A)
  double dloss_dw = 0.0; // gradient wrt w (A treated as constant)
  bool clipped = false;  // the clipped branch was the active minimum
};
LossTerm ddpo_loss(double w, double advantage, double clip_eps);

struct UpdateStats {
  double mean_loss = 0.0;
  double mean_abs_w_minus_1 = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;   // 0.5 * mean (logp_new - logp_old)^2
  int epochs_run = 0;
  bool kl_aborted = false;
  double grad_norm = 0.0;   // last pre-clip norm
};

// (trajectory index, step index) into a buffer.
using RecordRef = std::pair<int, int>;

struct MinibatchEval {
  GradStore grads;  // mean gradient over the records, adapter params only
  double mean_loss = 0.0;
  double mean_abs_w_minus_1 = 0.0;
  double max_abs_w_minus_1 = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  bool clip_equal_unclipped = true;  // clipped surrogate == unclipped, bitwise
};

// Recomputes likelihoods under the current adapters for a fixed set of
// records and forms the clipped surrogate and its gradient; no optimizer
// step. policy_update is built on this.
MinibatchEval eval_minibatch(const PolicyContext& policy, const ReplayBuffer& buffer,
                             const DdpoConfig& cfg, const diff::SamplingChain& chain,
                             const std::vector<RecordRef>& records);

// Several epochs of shuffled minibatch updates over all step records:
// recompute the likelihood under current adapters, form the clipped
// importance-weighted surrogate, and step Adam on the adapter parameters
// only. A minibatch whose approximate KL exceeds kl_guard aborts the
// remaining epochs for this buffer (logged by the caller, not fatal).
UpdateStats policy_update(const PolicyContext& policy, const ReplayBuffer& buffer,
                          const DdpoConfig& cfg, const diff::SamplingChain& chain,
                          AdamState& opt_state, const Rng& root, uint64_t iter);

struct IterationLog {
  int iter = 0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double loss = 0.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
  double wall_ms = 0.0;
};

struct FinetuneResult {
  std::vector<IterationLog> log;
  int total_resampled = 0;
};

// Alternates collection and policy update for cfg.max_iterations. The
// backbone and the reward encoder are checksum-verified unchanged.
FinetuneResult finetune(const PolicyContext& policy, const reward::DualEncoder& reward_enc,
                        const world::PromptOnlySplit& split, const DdpoConfig& cfg,
                        const diff::SamplingChain& chain, const Rng& root,
                        const std::function<void(const IterationLog&)>& on_iteration = nullptr,
                        const std::function<void(int)>& on_checkpoint = nullptr);

// Adapter tensors as optimizer references.
ParamRefs lora_refs(LoraSet& set);

}  // namespace dmrl::ddpo

#endif  // DMRL_DDPO_H_
