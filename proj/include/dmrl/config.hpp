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

#ifndef DMRL_CONFIG_H_
#define DMRL_CONFIG_H_

#include <string>
#include <vector>

#include <json.hpp>

namespace dmrl {

// Single structured run configuration. Parsing is strict: unknown keys are
// rejected, and the resolved config is echoed verbatim into the run
// directory so any run can be reproduced from its echo alone.
struct RunConfig {
  uint64_t seed = 1;
  std::string run_root = "runs";

  struct Data {
    std::string protocol = "leave-one-out";
    std::vector<std::string> held_out = {"circle-cw", "circle-ccw"};
    double ratio = 0.8;
    int instances_per_spec = 40;
  } data;

  struct Schedule {
    std::string kind = "linear";
    int steps = 50;
    int rl_steps = 10;
  } schedule;

  struct Model {
    int hidden = 96;
    int blocks = 2;
    int token_emb = 32;
    int time_emb = 32;
  } model;

  struct Lora {
    int rank = 4;
    double alpha = 16.0;
  } lora;

  struct Pretrain {
    int iters = 5000;
    int batch = 64;
    double lr = 1e-3;
    double p_uncond = 0.1;
    int log_every = 200;
    double eval_mse_max = 0.25;  // pilot-derived acceptance bound
  } pretrain;

  struct Reward {
    int iters = 1500;
    int batch = 64;
    double lr = 1e-3;
    double tau_init = 0.07;
    int emb = 32;
    std::vector<int> motion_hidden = {96, 64};
    std::vector<int> text_hidden = {64};
    int instances_per_spec = 24;
    double retrieval_min = 0.6;  // held-out 32-way R@1 bound
    double margin_min = 0.2;     // matched-vs-mismatched mean reward margin
    std::vector<int> evaluator_motion_hidden = {80, 48};
    std::vector<int> evaluator_text_hidden = {48};
  } reward;

  struct Ddpo {
    int iterations = 300;
    int n_prompts = 64;
    int replicas = 4;
    int update_epochs = 4;
    double clip_eps = 1e-4;
    double lr = 1.5e-4;
    int minibatch = 256;
    double grad_clip = 1.0;
    double kl_guard = 0.05;
    double cfg_scale = 2.5;
    int checkpoint_every = 50;
  } ddpo;

  struct Eval {
    std::string sampler = "fast";
    int fast_steps = 10;
    double cfg_scale = 2.5;
    int pool = 32;
    int r_shuffles = 8;
    int diversity_pairs = 300;
    int mmodality_prompts = 16;
    int mmodality_repeats = 10;
  } eval;

  struct Paths {
    std::string data_dir;
    std::string denoiser;
    std::string lora;
    std::string reward_enc;
    std::string evaluator;
  } paths;

  static RunConfig defaults() { return RunConfig(); }
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;

  // Applies a dotted-path override, e.g. "ddpo.lr=0.001".
  void set_override(const std::string& key_eq_value);

  uint64_t config_hash() const;
};

}  // namespace dmrl

#endif  // DMRL_CONFIG_H_
