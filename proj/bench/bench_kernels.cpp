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
//
// Timings for the serial reference kernels against the parallel paths:
// a plain matmul, batched denoiser forward/backward, and trajectory
// collection. Results are also compared bitwise so the benchmark doubles as
// a cross-check that threading never changes values.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "dmrl/ddpo.hpp"
#include "dmrl/kernels.hpp"

using namespace dmrl;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void bench_matmul() {
  const int n = 384, k = 384, m = 384;
  Rng rng(1);
  std::vector<double> a(static_cast<size_t>(n) * k), b(static_cast<size_t>(k) * m);
  for (double& v : a) v = rng.gaussian();
  for (double& v : b) v = rng.gaussian();
  std::vector<double> c1(static_cast<size_t>(n) * m), c2(c1.size());

  const int reps = 20;
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) nk::serial::matmul(a.data(), n, k, b.data(), m, c1.data());
  const double serial_ms = ms_since(t0) / reps;

  nk::set_max_threads(0);
  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) nk::matmul(a.data(), n, k, b.data(), m, c2.data());
  const double parallel_ms = ms_since(t0) / reps;

  const bool identical = std::memcmp(c1.data(), c2.data(), c1.size() * sizeof(double)) == 0;
  std::printf("matmul %dx%dx%d         serial %8.2f ms   parallel %8.2f ms   x%.2f   bitwise %s\n",
              n, k, m, serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "equal" : "DIFFER");
}

void bench_denoiser_batch() {
  diff::DenoiserConfig cfg;
  const diff::Denoiser model(cfg);
  ParamStore ps;
  Rng rng(2);
  model.init_params(ps, rng);
  const int batch = 256;
  std::vector<Tensor> xs(batch, Tensor({world::kMotionDim}));
  for (auto& x : xs) {
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.gaussian();
  }
  const world::PromptTokens tokens =
      world::tokenize("a person walks in a large circle clockwise steadily");

  auto run = [&](int threads) {
    nk::set_max_threads(threads);
    std::vector<GradStore> grads(static_cast<size_t>(batch));
    auto t0 = Clock::now();
    nk::parallel_for(batch, [&](int64_t i) {
      diff::Denoiser::Cache cache;
      const Tensor eps = model.forward(ps, nullptr, xs[static_cast<size_t>(i)], 25.0, tokens, &cache);
      model.backward(ps, nullptr, cache, eps, nn::TrainMode::kFull, grads[static_cast<size_t>(i)]);
    });
    const double ms = ms_since(t0);
    GradStore total;
    for (const auto& g : grads) total.add_scaled(g, 1.0 / batch);
    return std::make_pair(ms, total.global_norm());
  };
  const auto [serial_ms, n1] = run(1);
  const auto [parallel_ms, n2] = run(0);
  std::printf("denoiser fwd+bwd x%d   serial %8.2f ms   parallel %8.2f ms   x%.2f   bitwise %s\n",
              batch, serial_ms, parallel_ms, serial_ms / parallel_ms,
              n1 == n2 ? "equal" : "DIFFER");
}

void bench_collection() {
  diff::DenoiserConfig dcfg;
  const diff::Denoiser model(dcfg);
  ParamStore ps;
  Rng rng(3);
  model.init_params(ps, rng);
  LoraSet lora = model.make_lora(ps, 4, 16.0, rng);
  const diff::NoiseSchedule schedule = diff::make_schedule(50, diff::ScheduleKind::kLinear);
  const diff::SamplingChain chain = diff::make_chain(schedule, 10);

  world::PromptOnlySplit prompts;
  const auto specs = world::all_specs();
  for (int i = 0; i < 64; ++i) {
    const world::PromptSpec& s = specs[static_cast<size_t>(i) % specs.size()];
    prompts.prompts.push_back({s, i, world::tokenize(world::render_prompt(s))});
  }
  ddpo::DdpoConfig cfg;
  auto constant = [](const Tensor&, const world::PromptTokens&) { return 0.0; };
  ddpo::PolicyContext policy{&model, &ps, &lora};

  auto run = [&](int threads) {
    nk::set_max_threads(threads);
    Rng root(17);
    auto t0 = Clock::now();
    ddpo::ReplayBuffer buf =
        ddpo::collect(policy, ddpo::RewardFn(constant), prompts, cfg, chain, root, 0);
    const double ms = ms_since(t0);
    uint64_t hash = 0xcbf29ce484222325ULL;
    for (const auto& t : buf.trajectories) {
      hash = fnv1a(t.x0.data.data(), t.x0.data.size() * sizeof(double), hash);
    }
    return std::make_pair(ms, hash);
  };
  const auto [serial_ms, h1] = run(1);
  const auto [parallel_ms, h2] = run(0);
  std::printf("collect 256 x 10 steps  serial %8.2f ms   parallel %8.2f ms   x%.2f   bitwise %s\n",
              serial_ms, parallel_ms, serial_ms / parallel_ms, h1 == h2 ? "equal" : "DIFFER");
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", nk::max_threads());
  bench_matmul();
  bench_denoiser_batch();
  bench_collection();
  return 0;
}
