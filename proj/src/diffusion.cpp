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

#include "dmrl/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "dmrl/adam.hpp"
#include "dmrl/kernels.hpp"

namespace dmrl::diff {

Tensor forward_noise(const Tensor& x0, int t, const Tensor& noise, const NoiseSchedule& s) {
  if (t < 1 || t > s.t_diff) throw std::runtime_error("forward_noise: t out of range");
  if (!x0.same_shape(noise)) throw std::runtime_error("forward_noise: shape mismatch");
  const double ab = s.abar(t);
  const double ca = std::sqrt(ab), cb = std::sqrt(1.0 - ab);
  Tensor out(x0.shape);
  for (int64_t i = 0; i < x0.numel(); ++i) out[i] = ca * x0[i] + cb * noise[i];
  return out;
}

Tensor cfg_predict(const Tensor& eps_cond, const Tensor& eps_uncond, double scale) {
  if (!eps_cond.same_shape(eps_uncond)) throw std::runtime_error("cfg_predict: shape mismatch");
  Tensor out(eps_cond.shape);
  const double u = 1.0 - scale;
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = u * eps_uncond[i] + scale * eps_cond[i];
  return out;
}

EpsFn make_eps_fn(const Denoiser& model, const ParamStore& ps, const LoraSet* lora) {
  return [&model, &ps, lora](const Tensor& x, double t, double /*abar*/,
                             const world::PromptTokens& tokens) {
    return model.forward(ps, lora, x, t, tokens, nullptr);
  };
}

Tensor Guided::eps(const Tensor& x, double t, double abar) const {
  if (scale == 1.0) return fn(x, t, abar, cond);
  if (scale == 0.0) return fn(x, t, abar, world::null_prompt());
  const Tensor ec = fn(x, t, abar, cond);
  const Tensor eu = fn(x, t, abar, world::null_prompt());
  return cfg_predict(ec, eu, scale);
}

Tensor posterior_mean_from_eps(const Tensor& x_t, const Tensor& eps_hat,
                               const SamplingChain& chain, int k) {
  const size_t i = static_cast<size_t>(k);
  const double ab = chain.abar[i];
  const double inv_sa = 1.0 / std::sqrt(ab);
  const double sb = std::sqrt(1.0 - ab);
  const double c0 = chain.coef_x0[i], ct = chain.coef_xt[i];
  Tensor mean(x_t.shape);
  for (int64_t j = 0; j < x_t.numel(); ++j) {
    const double x0_hat = (x_t[j] - sb * eps_hat[j]) * inv_sa;
    mean[j] = c0 * x0_hat + ct * x_t[j];
  }
  return mean;
}

StepDistribution posterior_params(const Guided& model, const Tensor& x_t, int k,
                                  const SamplingChain& chain) {
  if (k < 0 || k >= chain.steps()) throw std::runtime_error("posterior_params: bad step index");
  const size_t i = static_cast<size_t>(k);
  const Tensor eps = model.eps(x_t, static_cast<double>(chain.t[i]), chain.abar[i]);
  StepDistribution dist;
  dist.sigma = chain.sigma[i];
  dist.mean = posterior_mean_from_eps(x_t, eps, chain, k);
  dist.mean.require_finite("posterior mean");
  return dist;
}

double gaussian_logp(const Tensor& x, const Tensor& mean, double sigma) {
  if (!x.same_shape(mean)) throw std::runtime_error("gaussian_logp: shape mismatch");
  if (!(sigma > 0.0)) throw std::runtime_error("gaussian_logp: sigma must be positive");
  static const double kLog2Pi = std::log(2.0 * M_PI);
  const double inv = 1.0 / sigma;
  const int64_t n = x.numel();
  double quad = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double z = (x[i] - mean[i]) * inv;
    quad += z * z;
  }
  return -0.5 * quad - static_cast<double>(n) * (std::log(sigma) + 0.5 * kLog2Pi);
}

StepResult step_sample(const StepDistribution& dist, Rng& rng) {
  StepResult r;
  r.x_prev = Tensor(dist.mean.shape);
  for (int64_t i = 0; i < dist.mean.numel(); ++i) {
    r.x_prev[i] = dist.mean[i] + dist.sigma * rng.gaussian();
  }
  r.logp = gaussian_logp(r.x_prev, dist.mean, dist.sigma);
  return r;
}

DiffusionTrajectory sample_ancestral(const Guided& model, const SamplingChain& chain, Rng& rng,
                                     bool record) {
  DiffusionTrajectory traj;
  traj.prompt = model.cond;
  Tensor x({world::kMotionDim});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.gaussian();
  for (int k = chain.steps() - 1; k >= 0; --k) {
    const StepDistribution dist = posterior_params(model, x, k, chain);
    StepResult step = step_sample(dist, rng);
    if (!step.x_prev.all_finite()) throw std::runtime_error("sample_ancestral: non-finite state");
    if (record) {
      traj.steps.push_back({chain.t[static_cast<size_t>(k)], x, step.x_prev, step.logp});
    }
    x = std::move(step.x_prev);
  }
  traj.x0 = std::move(x);
  return traj;
}

namespace {

double lambda_of(double abar) { return 0.5 * std::log(abar / (1.0 - abar)); }
double abar_of_lambda(double lam) { return 1.0 / (1.0 + std::exp(-2.0 * lam)); }

// Piecewise-linear inverse of t -> log(abar_t) on the integer grid, with
// linear extrapolation past the cleanest level (queries there are harmless:
// the solver weights vanish as sigma -> 0).
double t_of_abar(const NoiseSchedule& s, double abar) {
  const double target = std::log(abar);
  const int t_diff = s.t_diff;
  if (target <= std::log(s.abar(t_diff))) return static_cast<double>(t_diff);
  if (target >= std::log(s.abar(1))) {
    const double l1 = std::log(s.abar(1)), l2 = std::log(s.abar(2));
    const double t = 1.0 + (target - l1) / (l2 - l1);
    return t < 0.0 ? 0.0 : t;
  }
  for (int t = 1; t < t_diff; ++t) {
    const double la = std::log(s.abar(t)), lb = std::log(s.abar(t + 1));
    if (target <= la && target >= lb) {
      return t + (target - la) / (lb - la);
    }
  }
  return static_cast<double>(t_diff);
}

}  // namespace

Tensor sample_fast(const Guided& model, const NoiseSchedule& schedule, int steps,
                   const Tensor& x_start) {
  if (steps < 2) throw std::runtime_error("sample_fast: need steps >= 2");
  // Uniform log-SNR knots from the noisiest to the cleanest schedule level;
  // the last knot emits the data prediction directly, so `steps` counts
  // model evaluations.
  const double lam_lo = lambda_of(schedule.abar(schedule.t_diff));
  const double lam_hi = lambda_of(schedule.abar(1));
  const double h = (lam_hi - lam_lo) / (steps - 1);

  Tensor x = x_start;
  Tensor d_prev;
  for (int i = 0; i < steps; ++i) {
    const double lam = lam_lo + h * i;
    const double abar = abar_of_lambda(lam);
    const double alpha_i = std::sqrt(abar);
    const double sigma_i = std::sqrt(1.0 - abar);
    const double t_query = t_of_abar(schedule, abar);
    const Tensor eps = model.eps(x, t_query, abar);
    Tensor d(x.shape);
    for (int64_t j = 0; j < x.numel(); ++j) d[j] = (x[j] - sigma_i * eps[j]) / alpha_i;
    if (i == steps - 1) {
      d.require_finite("sample_fast output");
      return d;
    }

    const double abar_next = abar_of_lambda(lam + h);
    const double alpha_next = std::sqrt(abar_next);
    const double sigma_next = std::sqrt(1.0 - abar_next);
    const double ratio = sigma_next / sigma_i;
    const double phi = -std::expm1(-h);  // 1 - e^{-h}
    // First-order at the first knot (no history) and at the final update
    // (extrapolating across the cleanest segment overshoots at few steps).
    if (i == 0 || i == steps - 2) {
      for (int64_t j = 0; j < x.numel(); ++j) x[j] = ratio * x[j] + alpha_next * phi * d[j];
    } else {
      // Uniform grid: the multistep correction is 1.5 D_i - 0.5 D_{i-1}.
      for (int64_t j = 0; j < x.numel(); ++j) {
        const double dt = 1.5 * d[j] - 0.5 * d_prev[j];
        x[j] = ratio * x[j] + alpha_next * phi * dt;
      }
    }
    if (!x.all_finite()) throw std::runtime_error("sample_fast: non-finite state");
    d_prev = std::move(d);
  }
  return x;  // unreachable
}

Tensor sample_fast(const Guided& model, const NoiseSchedule& schedule, int steps, Rng& rng) {
  Tensor x({world::kMotionDim});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.gaussian();
  return sample_fast(model, schedule, steps, x);
}

PretrainResult pretrain(const Denoiser& model, ParamStore& ps, const world::MotionSplit& train,
                        const world::MotionSplit& eval_split, const NoiseSchedule& schedule,
                        const PretrainConfig& cfg, Rng& rng,
                        const std::function<void(int, double)>& on_log) {
  if (train.records.empty()) throw std::runtime_error("pretrain: empty training split");
  AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  AdamState state;
  const ParamRefs refs = refs_of(ps);
  const int n = static_cast<int>(train.records.size());
  const int dim = world::kMotionDim;

  PretrainResult result;
  for (int iter = 0; iter < cfg.iters; ++iter) {
    Rng it_rng = rng.stream({0x70726574ULL, static_cast<uint64_t>(iter)});
    struct SampleTask {
      int rec;
      int t;
      Tensor noise;
      bool uncond;
    };
    std::vector<SampleTask> tasks(static_cast<size_t>(cfg.batch));
    for (int b = 0; b < cfg.batch; ++b) {
      SampleTask& task = tasks[static_cast<size_t>(b)];
      task.rec = it_rng.uniform_int(0, n - 1);
      task.t = it_rng.uniform_int(1, schedule.t_diff);
      task.noise = Tensor({world::kFrames, world::kChannels});
      for (int64_t i = 0; i < dim; ++i) task.noise[i] = it_rng.gaussian();
      task.uncond = it_rng.uniform() < cfg.p_uncond;
    }
    std::vector<GradStore> grads(static_cast<size_t>(cfg.batch));
    std::vector<double> losses(static_cast<size_t>(cfg.batch), 0.0);
    const double gscale = 2.0 / (static_cast<double>(cfg.batch) * dim);
    nk::parallel_for(cfg.batch, [&](int64_t b) {
      const SampleTask& task = tasks[static_cast<size_t>(b)];
      const world::MotionRecord& rec = train.records[static_cast<size_t>(task.rec)];
      const Tensor x_t = forward_noise(rec.motion.frames, task.t, task.noise, schedule);
      const world::PromptTokens& tok =
          task.uncond ? world::null_prompt() : rec.prompt.tokens;
      Denoiser::Cache cache;
      const Tensor eps_hat = model.forward(ps, nullptr, x_t, task.t, tok, &cache);
      Tensor gout({dim});
      double loss = 0.0;
      for (int64_t i = 0; i < dim; ++i) {
        const double d = eps_hat[i] - task.noise[i];
        loss += d * d;
        gout[i] = gscale * d;
      }
      losses[static_cast<size_t>(b)] = loss / dim;
      model.backward(ps, nullptr, cache, gout, nn::TrainMode::kFull, grads[static_cast<size_t>(b)]);
    });
    GradStore total;
    double loss = 0.0;
    for (int b = 0; b < cfg.batch; ++b) {
      total.add_scaled(grads[static_cast<size_t>(b)], 1.0);
      loss += losses[static_cast<size_t>(b)];
    }
    loss /= cfg.batch;
    if (!std::isfinite(loss)) throw std::runtime_error("pretrain: loss diverged (non-finite)");
    adam_step(refs, total, state, adam);
    result.final_train_loss = loss;
    if (on_log && (iter % cfg.log_every == 0 || iter + 1 == cfg.iters)) on_log(iter, loss);
  }
  if (!eval_split.records.empty()) {
    result.eval_mse =
        eval_eps_mse(model, ps, nullptr, eval_split, schedule, rng.stream({0x6576616cULL}));
  }
  return result;
}

double eval_eps_mse(const Denoiser& model, const ParamStore& ps, const LoraSet* lora,
                    const world::MotionSplit& split, const NoiseSchedule& schedule, Rng rng) {
  if (split.records.empty()) return 0.0;
  const int dim = world::kMotionDim;
  const int n = static_cast<int>(split.records.size());
  struct Task {
    int t;
    Tensor noise;
  };
  std::vector<Task> tasks(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    tasks[static_cast<size_t>(i)].t = rng.uniform_int(1, schedule.t_diff);
    Tensor& nz = tasks[static_cast<size_t>(i)].noise;
    nz = Tensor({world::kFrames, world::kChannels});
    for (int64_t j = 0; j < dim; ++j) nz[j] = rng.gaussian();
  }
  std::vector<double> errs(static_cast<size_t>(n), 0.0);
  nk::parallel_for(n, [&](int64_t i) {
    const world::MotionRecord& rec = split.records[static_cast<size_t>(i)];
    const Task& task = tasks[static_cast<size_t>(i)];
    const Tensor x_t = forward_noise(rec.motion.frames, task.t, task.noise, schedule);
    const Tensor eps_hat = model.forward(ps, lora, x_t, task.t, rec.prompt.tokens, nullptr);
    double e = 0.0;
    for (int64_t j = 0; j < dim; ++j) {
      const double d = eps_hat[j] - task.noise[j];
      e += d * d;
    }
    errs[static_cast<size_t>(i)] = e / dim;
  });
  double mse = 0.0;
  for (double e : errs) mse += e;
  return mse / n;
}

}  // namespace dmrl::diff
