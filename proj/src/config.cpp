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

#include "dmrl/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "dmrl/param_store.hpp"

namespace dmrl {

namespace {

void check_keys(const nlohmann::json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::runtime_error("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw std::runtime_error("config: unknown key '" + where + key + "'");
    }
  }
}

template <typename T>
void get_to(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  check_keys(j, "", {"seed", "run_root", "data", "schedule", "model", "lora", "pretrain", "reward",
                     "ddpo", "eval", "paths"});
  get_to(j, "seed", c.seed);
  get_to(j, "run_root", c.run_root);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data.", {"protocol", "held_out", "ratio", "instances_per_spec"});
    get_to(d, "protocol", c.data.protocol);
    get_to(d, "held_out", c.data.held_out);
    get_to(d, "ratio", c.data.ratio);
    get_to(d, "instances_per_spec", c.data.instances_per_spec);
  }
  if (j.contains("schedule")) {
    const auto& d = j.at("schedule");
    check_keys(d, "schedule.", {"kind", "steps", "rl_steps"});
    get_to(d, "kind", c.schedule.kind);
    get_to(d, "steps", c.schedule.steps);
    get_to(d, "rl_steps", c.schedule.rl_steps);
  }
  if (j.contains("model")) {
    const auto& d = j.at("model");
    check_keys(d, "model.", {"hidden", "blocks", "token_emb", "time_emb"});
    get_to(d, "hidden", c.model.hidden);
    get_to(d, "blocks", c.model.blocks);
    get_to(d, "token_emb", c.model.token_emb);
    get_to(d, "time_emb", c.model.time_emb);
  }
  if (j.contains("lora")) {
    const auto& d = j.at("lora");
    check_keys(d, "lora.", {"rank", "alpha"});
    get_to(d, "rank", c.lora.rank);
    get_to(d, "alpha", c.lora.alpha);
  }
  if (j.contains("pretrain")) {
    const auto& d = j.at("pretrain");
    check_keys(d, "pretrain.", {"iters", "batch", "lr", "p_uncond", "log_every", "eval_mse_max"});
    get_to(d, "iters", c.pretrain.iters);
    get_to(d, "batch", c.pretrain.batch);
    get_to(d, "lr", c.pretrain.lr);
    get_to(d, "p_uncond", c.pretrain.p_uncond);
    get_to(d, "log_every", c.pretrain.log_every);
    get_to(d, "eval_mse_max", c.pretrain.eval_mse_max);
  }
  if (j.contains("reward")) {
    const auto& d = j.at("reward");
    check_keys(d, "reward.",
               {"iters", "batch", "lr", "tau_init", "emb", "motion_hidden", "text_hidden",
                "instances_per_spec", "retrieval_min", "margin_min", "evaluator_motion_hidden",
                "evaluator_text_hidden"});
    get_to(d, "iters", c.reward.iters);
    get_to(d, "batch", c.reward.batch);
    get_to(d, "lr", c.reward.lr);
    get_to(d, "tau_init", c.reward.tau_init);
    get_to(d, "emb", c.reward.emb);
    get_to(d, "motion_hidden", c.reward.motion_hidden);
    get_to(d, "text_hidden", c.reward.text_hidden);
    get_to(d, "instances_per_spec", c.reward.instances_per_spec);
    get_to(d, "retrieval_min", c.reward.retrieval_min);
    get_to(d, "margin_min", c.reward.margin_min);
    get_to(d, "evaluator_motion_hidden", c.reward.evaluator_motion_hidden);
    get_to(d, "evaluator_text_hidden", c.reward.evaluator_text_hidden);
  }
  if (j.contains("ddpo")) {
    const auto& d = j.at("ddpo");
    check_keys(d, "ddpo.",
               {"iterations", "n_prompts", "replicas", "update_epochs", "clip_eps", "lr",
                "minibatch", "grad_clip", "kl_guard", "cfg_scale", "checkpoint_every"});
    get_to(d, "iterations", c.ddpo.iterations);
    get_to(d, "n_prompts", c.ddpo.n_prompts);
    get_to(d, "replicas", c.ddpo.replicas);
    get_to(d, "update_epochs", c.ddpo.update_epochs);
    get_to(d, "clip_eps", c.ddpo.clip_eps);
    get_to(d, "lr", c.ddpo.lr);
    get_to(d, "minibatch", c.ddpo.minibatch);
    get_to(d, "grad_clip", c.ddpo.grad_clip);
    get_to(d, "kl_guard", c.ddpo.kl_guard);
    get_to(d, "cfg_scale", c.ddpo.cfg_scale);
    get_to(d, "checkpoint_every", c.ddpo.checkpoint_every);
  }
  if (j.contains("eval")) {
    const auto& d = j.at("eval");
    check_keys(d, "eval.",
               {"sampler", "fast_steps", "cfg_scale", "pool", "r_shuffles", "diversity_pairs",
                "mmodality_prompts", "mmodality_repeats"});
    get_to(d, "sampler", c.eval.sampler);
    get_to(d, "fast_steps", c.eval.fast_steps);
    get_to(d, "cfg_scale", c.eval.cfg_scale);
    get_to(d, "pool", c.eval.pool);
    get_to(d, "r_shuffles", c.eval.r_shuffles);
    get_to(d, "diversity_pairs", c.eval.diversity_pairs);
    get_to(d, "mmodality_prompts", c.eval.mmodality_prompts);
    get_to(d, "mmodality_repeats", c.eval.mmodality_repeats);
  }
  if (j.contains("paths")) {
    const auto& d = j.at("paths");
    check_keys(d, "paths.", {"data_dir", "denoiser", "lora", "reward_enc", "evaluator"});
    get_to(d, "data_dir", c.paths.data_dir);
    get_to(d, "denoiser", c.paths.denoiser);
    get_to(d, "lora", c.paths.lora);
    get_to(d, "reward_enc", c.paths.reward_enc);
    get_to(d, "evaluator", c.paths.evaluator);
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  nlohmann::json j;
  is >> j;
  return from_json(j);
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["run_root"] = run_root;
  j["data"] = {{"protocol", data.protocol},
               {"held_out", data.held_out},
               {"ratio", data.ratio},
               {"instances_per_spec", data.instances_per_spec}};
  j["schedule"] = {{"kind", schedule.kind}, {"steps", schedule.steps}, {"rl_steps", schedule.rl_steps}};
  j["model"] = {{"hidden", model.hidden},
                {"blocks", model.blocks},
                {"token_emb", model.token_emb},
                {"time_emb", model.time_emb}};
  j["lora"] = {{"rank", lora.rank}, {"alpha", lora.alpha}};
  j["pretrain"] = {{"iters", pretrain.iters},     {"batch", pretrain.batch},
                   {"lr", pretrain.lr},           {"p_uncond", pretrain.p_uncond},
                   {"log_every", pretrain.log_every}, {"eval_mse_max", pretrain.eval_mse_max}};
  j["reward"] = {{"iters", reward.iters},
                 {"batch", reward.batch},
                 {"lr", reward.lr},
                 {"tau_init", reward.tau_init},
                 {"emb", reward.emb},
                 {"motion_hidden", reward.motion_hidden},
                 {"text_hidden", reward.text_hidden},
                 {"instances_per_spec", reward.instances_per_spec},
                 {"retrieval_min", reward.retrieval_min},
                 {"margin_min", reward.margin_min},
                 {"evaluator_motion_hidden", reward.evaluator_motion_hidden},
                 {"evaluator_text_hidden", reward.evaluator_text_hidden}};
  j["ddpo"] = {{"iterations", ddpo.iterations},
               {"n_prompts", ddpo.n_prompts},
               {"replicas", ddpo.replicas},
               {"update_epochs", ddpo.update_epochs},
               {"clip_eps", ddpo.clip_eps},
               {"lr", ddpo.lr},
               {"minibatch", ddpo.minibatch},
               {"grad_clip", ddpo.grad_clip},
               {"kl_guard", ddpo.kl_guard},
               {"cfg_scale", ddpo.cfg_scale},
               {"checkpoint_every", ddpo.checkpoint_every}};
  j["eval"] = {{"sampler", eval.sampler},
               {"fast_steps", eval.fast_steps},
               {"cfg_scale", eval.cfg_scale},
               {"pool", eval.pool},
               {"r_shuffles", eval.r_shuffles},
               {"diversity_pairs", eval.diversity_pairs},
               {"mmodality_prompts", eval.mmodality_prompts},
               {"mmodality_repeats", eval.mmodality_repeats}};
  j["paths"] = {{"data_dir", paths.data_dir},
                {"denoiser", paths.denoiser},
                {"lora", paths.lora},
                {"reward_enc", paths.reward_enc},
                {"evaluator", paths.evaluator}};
  return j;
}

void RunConfig::set_override(const std::string& key_eq_value) {
  const size_t eq = key_eq_value.find('=');
  if (eq == std::string::npos) {
    throw std::runtime_error("override must be key=value: '" + key_eq_value + "'");
  }
  const std::string key = key_eq_value.substr(0, eq);
  const std::string value = key_eq_value.substr(eq + 1);

  nlohmann::json j = to_json();
  nlohmann::json* node = &j;
  size_t pos = 0;
  while (true) {
    const size_t dot = key.find('.', pos);
    const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!node->contains(part)) throw std::runtime_error("config: unknown key '" + key + "'");
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  // Parse the value with the type of the existing entry.
  if (node->is_string()) {
    *node = value;
  } else {
    *node = nlohmann::json::parse(value);
  }
  *this = from_json(j);
}

uint64_t RunConfig::config_hash() const {
  const std::string text = to_json().dump();
  return fnv1a(text.data(), text.size());
}

}  // namespace dmrl
