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

#include "dmrl/ddpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "dmrl/kernels.hpp"

namespace dmrl::ddpo {

double ReplayBuffer::mean_reward() const {
  if (trajectories.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : trajectories) s += t.reward;
  return s / static_cast<double>(trajectories.size());
}

double ReplayBuffer::std_reward() const {
  if (trajectories.empty()) return 0.0;
  const double m = mean_reward();
  double s = 0.0;
  for (const auto& t : trajectories) s += (t.reward - m) * (t.reward - m);
  return std::sqrt(s / static_cast<double>(trajectories.size()));
}

void DdpoConfig::validate() const {
  if (n_prompts < 1 || replicas < 1) throw std::runtime_error("ddpo: bad prompt/replica counts");
  if (clip_eps <= 0.0) throw std::runtime_error("ddpo: clip_eps must be positive");
  if (update_epochs < 1) throw std::runtime_error("ddpo: update_epochs must be >= 1");
  if (minibatch < 1) throw std::runtime_error("ddpo: minibatch must be >= 1");
}

ParamRefs lora_refs(LoraSet& set) {
  ParamRefs refs;
  for (auto& ad : set.adapters) {
    refs.emplace_back(ad.a_name(), &ad.A);
    refs.emplace_back(ad.b_name(), &ad.B);
  }
  return refs;
}

ReplayBuffer collect(const PolicyContext& policy, const reward::DualEncoder& reward_enc,
                     const world::PromptOnlySplit& prompts, const DdpoConfig& cfg,
                     const diff::SamplingChain& chain, const Rng& root, uint64_t iter,
                     CollectStats* stats) {
  if (!reward_enc.frozen()) throw std::runtime_error("collect: reward encoder is not frozen");
  return collect(
      policy,
      [&reward_enc](const Tensor& x0, const world::PromptTokens& tokens) {
        return reward::score_flat(reward_enc, x0, tokens);
      },
      prompts, cfg, chain, root, iter, stats);
}

ReplayBuffer collect(const PolicyContext& policy, const RewardFn& reward_fn,
                     const world::PromptOnlySplit& prompts, const DdpoConfig& cfg,
                     const diff::SamplingChain& chain, const Rng& root, uint64_t iter,
                     CollectStats* stats) {
  cfg.validate();
  if (policy.lora == nullptr || policy.lora->adapters.empty()) {
    throw std::runtime_error("collect: policy has no active adapters");
  }
  const int pool = static_cast<int>(prompts.prompts.size());
  if (pool < cfg.n_prompts) {
    throw std::runtime_error("collect: prompt pool smaller than n_prompts");
  }

  // Distinct prompts for this iteration (uniform, without replacement).
  Rng pick = root.stream({0x70696b31ULL, iter});
  std::vector<int> ids(static_cast<size_t>(pool));
  for (int i = 0; i < pool; ++i) ids[static_cast<size_t>(i)] = i;
  for (int i = 0; i < cfg.n_prompts; ++i) {
    const int j = pick.uniform_int(i, pool - 1);
    std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
  }

  ReplayBuffer buffer;
  buffer.capacity = cfg.capacity();
  buffer.replicas = cfg.replicas;
  buffer.trajectories.resize(static_cast<size_t>(cfg.capacity()));
  std::vector<int> resampled(static_cast<size_t>(cfg.capacity()), 0);

  nk::parallel_for(cfg.capacity(), [&](int64_t slot) {
    const int p = static_cast<int>(slot) / cfg.replicas;
    const world::PromptInstance& inst = prompts.prompts[static_cast<size_t>(ids[static_cast<size_t>(p)])];
    diff::Guided guided{diff::make_eps_fn(*policy.model, *policy.params, policy.lora), inst.tokens,
                        cfg.cfg_scale};
    for (int attempt = 0;; ++attempt) {
      if (attempt > 8) throw std::runtime_error("collect: repeated non-finite trajectories");
      Rng traj_rng = root.stream({0x74726a31ULL, iter, static_cast<uint64_t>(slot),
                                  static_cast<uint64_t>(attempt)});
      try {
        diff::DiffusionTrajectory traj = sample_ancestral(guided, chain, traj_rng, true);
        traj.reward = reward_fn(traj.x0, inst.tokens);
        if (!std::isfinite(traj.reward)) throw std::runtime_error("non-finite reward");
        buffer.trajectories[static_cast<size_t>(slot)] = std::move(traj);
        resampled[static_cast<size_t>(slot)] = attempt;
        break;
      } catch (const std::runtime_error&) {
        continue;  // dropped, resampled with a fresh stream
      }
    }
  });
  if (stats != nullptr) {
    stats->resampled = 0;
    for (int r : resampled) stats->resampled += r;
  }
  return buffer;
}

void compute_advantages(ReplayBuffer& buffer) {
  const int replicas = buffer.replicas;
  const int n = static_cast<int>(buffer.trajectories.size());
  if (n % replicas != 0) throw std::runtime_error("compute_advantages: ragged buffer");
  for (int g = 0; g < n / replicas; ++g) {
    double mean = 0.0;
    for (int r = 0; r < replicas; ++r) mean += buffer.trajectories[static_cast<size_t>(g * replicas + r)].reward;
    mean /= replicas;
    double var = 0.0;
    for (int r = 0; r < replicas; ++r) {
      const double d = buffer.trajectories[static_cast<size_t>(g * replicas + r)].reward - mean;
      var += d * d;
    }
    const double std = std::sqrt(var / replicas);
    for (int r = 0; r < replicas; ++r) {
      auto& t = buffer.trajectories[static_cast<size_t>(g * replicas + r)];
      t.advantage = (t.reward - mean) / (std + 1e-6);
    }
  }
}

double importance_weight(double logp_new, double logp_old) {
  if (!std::isfinite(logp_new) || !std::isfinite(logp_old)) {
    throw std::runtime_error("importance_weight: non-finite log probability");
  }
  return std::exp(std::clamp(logp_new - logp_old, -20.0, 20.0));
}

LossTerm ddpo_loss(double w, double advantage, double clip_eps) {
  if (!(clip_eps > 0.0)) throw std::runtime_error("ddpo_loss: clip_eps must be positive");
  const double wc = std::clamp(w, 1.0 - clip_eps, 1.0 + clip_eps);
  const double surr1 = w * advantage;
  const double surr2 = wc * advantage;
  LossTerm term;
  if (surr1 <= surr2) {
    term.loss = -surr1;
    term.dloss_dw = -advantage;
    term.clipped = false;
  } else {
    term.loss = -surr2;
    // Inside the clip band the branches coincide; outside, the clipped
    // surrogate is flat in w.
    term.dloss_dw = (w > 1.0 - clip_eps && w < 1.0 + clip_eps) ? -advantage : 0.0;
    term.clipped = true;
  }
  return term;
}

namespace {

struct RecordOut {
  GradStore grads;
  double loss = 0.0;
  double abs_w1 = 0.0;
  double diff_sq = 0.0;
  bool clipped = false;
  bool clip_bitequal = true;
};

void process_record(const PolicyContext& policy, const ReplayBuffer& buffer,
                    const DdpoConfig& cfg, const diff::SamplingChain& chain, const RecordRef& ref,
                    RecordOut& out) {
  const diff::DiffusionTrajectory& traj = buffer.trajectories[static_cast<size_t>(ref.first)];
  const diff::StepRecord& rec = traj.steps[static_cast<size_t>(ref.second)];
  int k = -1;
  for (int i = 0; i < chain.steps(); ++i) {
    if (chain.t[static_cast<size_t>(i)] == rec.t) {
      k = i;
      break;
    }
  }
  if (k < 0) throw std::runtime_error("policy_update: record timestep not on chain");

  const diff::Denoiser& model = *policy.model;
  const ParamStore& ps = *policy.params;
  const LoraSet* lora = policy.lora;
  const double s = cfg.cfg_scale;
  const double t_query = static_cast<double>(rec.t);

  diff::Denoiser::Cache cache_c, cache_u;
  const Tensor eps_c = model.forward(ps, lora, rec.x_t, t_query, traj.prompt, &cache_c);
  Tensor eps_hat;
  bool has_uncond = false;
  if (s == 1.0) {
    eps_hat = eps_c;
  } else {
    const Tensor eps_u = model.forward(ps, lora, rec.x_t, t_query, world::null_prompt(), &cache_u);
    has_uncond = true;
    eps_hat = diff::cfg_predict(eps_c, eps_u, s);
  }

  const Tensor mean = diff::posterior_mean_from_eps(rec.x_t, eps_hat, chain, k);
  const double sigma = chain.sigma[static_cast<size_t>(k)];
  const double logp_new = diff::gaussian_logp(rec.x_prev, mean, sigma);
  const double diff = logp_new - rec.logp_old;
  const double w = importance_weight(logp_new, rec.logp_old);
  const LossTerm term = ddpo_loss(w, traj.advantage, cfg.clip_eps);

  out.loss = term.loss;
  out.abs_w1 = std::abs(w - 1.0);
  out.diff_sq = diff * diff;
  out.clipped = term.clipped;
  const double unclipped = -(w * traj.advantage);
  out.clip_bitequal = std::memcmp(&term.loss, &unclipped, sizeof(double)) == 0;

  const double dl_dlogp = term.dloss_dw * (std::abs(diff) < 20.0 ? w : 0.0);
  if (dl_dlogp == 0.0) return;

  // d logp / d mean = (x_prev - mean)/sigma^2; d mean / d eps = -c0*sqrt(1-abar)/sqrt(abar)
  const double ab = chain.abar[static_cast<size_t>(k)];
  const double mean_to_eps = -chain.coef_x0[static_cast<size_t>(k)] * std::sqrt(1.0 - ab) / std::sqrt(ab);
  const double inv_var = 1.0 / (sigma * sigma);
  Tensor g_eps(eps_hat.shape);
  for (int64_t j = 0; j < g_eps.numel(); ++j) {
    const double g_mean = dl_dlogp * (rec.x_prev[j] - mean[j]) * inv_var;
    g_eps[j] = g_mean * mean_to_eps;
  }

  if (s == 1.0) {
    model.backward(ps, lora, cache_c, g_eps, nn::TrainMode::kLoraOnly, out.grads);
  } else {
    Tensor g_cond(g_eps.shape), g_uncond(g_eps.shape);
    for (int64_t j = 0; j < g_eps.numel(); ++j) {
      g_cond[j] = s * g_eps[j];
      g_uncond[j] = (1.0 - s) * g_eps[j];
    }
    model.backward(ps, lora, cache_c, g_cond, nn::TrainMode::kLoraOnly, out.grads);
    if (has_uncond) {
      model.backward(ps, lora, cache_u, g_uncond, nn::TrainMode::kLoraOnly, out.grads);
    }
  }
}

}  // namespace

MinibatchEval eval_minibatch(const PolicyContext& policy, const ReplayBuffer& buffer,
                             const DdpoConfig& cfg, const diff::SamplingChain& chain,
                             const std::vector<RecordRef>& records) {
  const int mb = static_cast<int>(records.size());
  if (mb == 0) throw std::runtime_error("eval_minibatch: no records");
  std::vector<RecordOut> outs(static_cast<size_t>(mb));
  nk::parallel_for(mb, [&](int64_t i) {
    process_record(policy, buffer, cfg, chain, records[static_cast<size_t>(i)],
                   outs[static_cast<size_t>(i)]);
  });
  MinibatchEval ev;
  double diffsq = 0.0;
  int clipped = 0;
  for (int i = 0; i < mb; ++i) {
    const RecordOut& o = outs[static_cast<size_t>(i)];
    ev.grads.add_scaled(o.grads, 1.0 / mb);
    ev.mean_loss += o.loss;
    ev.mean_abs_w_minus_1 += o.abs_w1;
    ev.max_abs_w_minus_1 = std::max(ev.max_abs_w_minus_1, o.abs_w1);
    diffsq += o.diff_sq;
    if (o.clipped) ++clipped;
    ev.clip_equal_unclipped = ev.clip_equal_unclipped && o.clip_bitequal;
  }
  ev.mean_loss /= mb;
  ev.mean_abs_w_minus_1 /= mb;
  ev.clip_fraction = static_cast<double>(clipped) / mb;
  ev.approx_kl = 0.5 * diffsq / mb;
  return ev;
}

UpdateStats policy_update(const PolicyContext& policy, const ReplayBuffer& buffer,
                          const DdpoConfig& cfg, const diff::SamplingChain& chain,
                          AdamState& opt_state, const Rng& root, uint64_t iter) {
  cfg.validate();
  if (buffer.trajectories.empty()) throw std::runtime_error("policy_update: empty buffer");
  std::vector<RecordRef> records;
  for (size_t ti = 0; ti < buffer.trajectories.size(); ++ti) {
    const auto& traj = buffer.trajectories[ti];
    if (static_cast<int>(traj.steps.size()) != chain.steps()) {
      throw std::runtime_error("policy_update: trajectory does not cover the chain");
    }
    for (size_t si = 0; si < traj.steps.size(); ++si) {
      records.push_back({static_cast<int>(ti), static_cast<int>(si)});
    }
  }

  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  const ParamRefs refs = lora_refs(*policy.lora);

  UpdateStats stats;
  double sum_loss = 0.0, sum_absw = 0.0, sum_kl = 0.0, sum_clip = 0.0;
  int64_t n_batches = 0;
  for (int epoch = 0; epoch < cfg.update_epochs && !stats.kl_aborted; ++epoch) {
    Rng shuffle_rng = root.stream({0x75706431ULL, iter, static_cast<uint64_t>(epoch)});
    std::vector<RecordRef> order = records;
    for (size_t i = order.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    for (size_t start = 0; start < order.size() && !stats.kl_aborted;
         start += static_cast<size_t>(cfg.minibatch)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.minibatch));
      const std::vector<RecordRef> batch(order.begin() + static_cast<int64_t>(start),
                                         order.begin() + static_cast<int64_t>(end));
      MinibatchEval ev = eval_minibatch(policy, buffer, cfg, chain, batch);
      sum_loss += ev.mean_loss;
      sum_absw += ev.mean_abs_w_minus_1;
      sum_kl += ev.approx_kl;
      sum_clip += ev.clip_fraction;
      ++n_batches;
      if (ev.approx_kl > cfg.kl_guard) {
        stats.kl_aborted = true;
        break;
      }
      stats.grad_norm = clip_global_norm(ev.grads, cfg.grad_clip);
      adam_step(refs, ev.grads, opt_state, adam);
    }
    if (!stats.kl_aborted) stats.epochs_run = epoch + 1;
  }
  if (n_batches > 0) {
    stats.mean_loss = sum_loss / static_cast<double>(n_batches);
    stats.mean_abs_w_minus_1 = sum_absw / static_cast<double>(n_batches);
    stats.clip_fraction = sum_clip / static_cast<double>(n_batches);
    stats.approx_kl = sum_kl / static_cast<double>(n_batches);
  }
  return stats;
}

FinetuneResult finetune(const PolicyContext& policy, const reward::DualEncoder& reward_enc,
                        const world::PromptOnlySplit& split, const DdpoConfig& cfg,
                        const diff::SamplingChain& chain, const Rng& root,
                        const std::function<void(const IterationLog&)>& on_iteration,
                        const std::function<void(int)>& on_checkpoint) {
  cfg.validate();
  const uint64_t backbone_sum = policy.params->checksum();
  const uint64_t reward_sum = reward_enc.checksum();

  AdamState opt_state;
  FinetuneResult result;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const auto start = std::chrono::steady_clock::now();
    CollectStats cstats;
    ReplayBuffer buffer =
        collect(policy, reward_enc, split, cfg, chain, root, static_cast<uint64_t>(iter), &cstats);
    result.total_resampled += cstats.resampled;
    compute_advantages(buffer);
    const UpdateStats ustats =
        policy_update(policy, buffer, cfg, chain, opt_state, root, static_cast<uint64_t>(iter));
    const auto stop = std::chrono::steady_clock::now();

    IterationLog log;
    log.iter = iter;
    log.mean_reward = buffer.mean_reward();
    log.std_reward = buffer.std_reward();
    log.loss = ustats.mean_loss;
    log.clip_frac = ustats.clip_fraction;
    log.approx_kl = ustats.approx_kl;
    log.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    result.log.push_back(log);
    if (on_iteration) on_iteration(log);
    if (on_checkpoint && cfg.checkpoint_every > 0 && (iter + 1) % cfg.checkpoint_every == 0) {
      on_checkpoint(iter + 1);
    }
  }
  if (policy.params->checksum() != backbone_sum) {
    throw std::runtime_error("finetune: backbone parameters changed");
  }
  if (reward_enc.checksum() != reward_sum) {
    throw std::runtime_error("finetune: reward encoder changed");
  }
  return result;
}

}  // namespace dmrl::ddpo
