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

#include "dmrl/cli.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dmrl/checkpoint.hpp"
#include "dmrl/config.hpp"
#include "dmrl/ddpo.hpp"
#include "dmrl/kernels.hpp"
#include "dmrl/protocol.hpp"
#include "dmrl/svg.hpp"

namespace dmrl::cli {

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string run_dir;
  int64_t seed = -1;
  int threads = 0;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config_path, "run configuration (JSON)");
  cmd->add_option("--run-dir", a.run_dir, "output directory (default: timestamped under run_root)");
  cmd->add_option("--seed", a.seed, "override the config seed");
  cmd->add_option("--threads", a.threads, "cap worker threads (0 = all)");
  cmd->add_option("--set", a.overrides, "config override, e.g. --set ddpo.lr=0.001")
      ->take_all();
}

RunConfig resolve_config(const CommonArgs& a) {
  RunConfig cfg = a.config_path.empty() ? RunConfig::defaults() : RunConfig::load(a.config_path);
  for (const std::string& o : a.overrides) cfg.set_override(o);
  if (a.seed >= 0) cfg.seed = static_cast<uint64_t>(a.seed);
  if (a.threads > 0) nk::set_max_threads(a.threads);
  const char* root_env = std::getenv("DMRL_RUN_ROOT");
  if (root_env != nullptr && *root_env != '\0') cfg.run_root = root_env;
  return cfg;
}

std::string make_run_dir(const RunConfig& cfg, const std::string& cmd,
                         const std::string& explicit_dir) {
  std::string dir = explicit_dir;
  if (dir.empty()) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
    dir = cfg.run_root + "/" + stamp + "-" + cmd;
  }
  fs::create_directories(dir);
  return dir;
}

void echo_config(const RunConfig& cfg, const std::string& run_dir) {
  std::ofstream os(run_dir + "/config.json");
  if (!os) throw std::runtime_error("cannot write config echo in " + run_dir);
  os << cfg.to_json().dump(2) << "\n";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << text;
}

diff::DenoiserConfig denoiser_config(const RunConfig& cfg) {
  diff::DenoiserConfig dc;
  dc.hidden = cfg.model.hidden;
  dc.blocks = cfg.model.blocks;
  dc.token_emb = cfg.model.token_emb;
  dc.time_emb = cfg.model.time_emb;
  return dc;
}

nlohmann::json denoiser_meta(const RunConfig& cfg) {
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(cfg.config_hash()));
  return nlohmann::json{{"hidden", cfg.model.hidden},
                        {"blocks", cfg.model.blocks},
                        {"token_emb", cfg.model.token_emb},
                        {"time_emb", cfg.model.time_emb},
                        {"schedule_kind", cfg.schedule.kind},
                        {"schedule_steps", cfg.schedule.steps},
                        {"config_hash", std::string(hash)}};
}

void verify_denoiser_meta(const nlohmann::json& meta, const RunConfig& cfg,
                          const std::string& path) {
  const bool ok = meta.at("hidden").get<int>() == cfg.model.hidden &&
                  meta.at("blocks").get<int>() == cfg.model.blocks &&
                  meta.at("token_emb").get<int>() == cfg.model.token_emb &&
                  meta.at("time_emb").get<int>() == cfg.model.time_emb &&
                  meta.at("schedule_kind").get<std::string>() == cfg.schedule.kind &&
                  meta.at("schedule_steps").get<int>() == cfg.schedule.steps;
  if (!ok) {
    throw std::runtime_error("checkpoint/schedule metadata mismatch for " + path);
  }
}

world::SplitBundle load_dataset(const std::string& dir) {
  if (dir.empty()) throw std::runtime_error("paths.data_dir is not set");
  std::ifstream ms(dir + "/meta.json");
  if (!ms) throw std::runtime_error("missing dataset meta: " + dir + "/meta.json");
  nlohmann::json meta;
  ms >> meta;
  world::SplitBundle b;
  b.protocol = world::parse_protocol(meta.at("protocol").get<std::string>());
  for (const auto& f : meta.at("held_out")) b.held_out.push_back(world::parse_family(f.get<std::string>()));
  b.ratio = meta.at("ratio").get<double>();
  b.per_spec = meta.at("instances_per_spec").get<int>();
  b.seed = meta.at("seed").get<uint64_t>();
  b.pretrain_train = world::read_motion_jsonl(dir + "/pretrain_train.jsonl");
  b.pretrain_eval = world::read_motion_jsonl(dir + "/pretrain_eval.jsonl");
  b.adapt_train = world::read_prompts_jsonl(dir + "/adapt_train.jsonl");
  b.adapt_eval = world::read_prompts_jsonl(dir + "/adapt_eval.jsonl");
  return b;
}

reward::EncoderConfig encoder_config(const RunConfig& cfg, bool evaluator) {
  reward::EncoderConfig ec;
  ec.emb = cfg.reward.emb;
  ec.tau_init = cfg.reward.tau_init;
  ec.motion_hidden = evaluator ? cfg.reward.evaluator_motion_hidden : cfg.reward.motion_hidden;
  ec.text_hidden = evaluator ? cfg.reward.evaluator_text_hidden : cfg.reward.text_hidden;
  return ec;
}

nlohmann::json encoder_meta(const reward::EncoderConfig& ec, uint64_t init_seed,
                            const RunConfig& cfg) {
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(cfg.config_hash()));
  return nlohmann::json{{"emb", ec.emb},
                        {"motion_hidden", ec.motion_hidden},
                        {"text_hidden", ec.text_hidden},
                        {"token_emb", ec.token_emb},
                        {"tau_init", ec.tau_init},
                        {"init_seed", init_seed},
                        {"config_hash", std::string(hash)}};
}

reward::DualEncoder load_encoder(const std::string& path, const std::string& kind) {
  nlohmann::json meta;
  ParamStore ps = load_checkpoint(path, kind, &meta);
  reward::EncoderConfig ec;
  ec.emb = meta.at("emb").get<int>();
  ec.motion_hidden = meta.at("motion_hidden").get<std::vector<int>>();
  ec.text_hidden = meta.at("text_hidden").get<std::vector<int>>();
  ec.token_emb = meta.at("token_emb").get<int>();
  ec.tau_init = meta.at("tau_init").get<double>();
  reward::DualEncoder enc(ec, meta.at("init_seed").get<uint64_t>());
  enc.load_params(std::move(ps));
  return enc;
}

// ---- subcommand bodies ----

int cmd_gen_data(const RunConfig& cfg, const std::string& run_dir) {
  std::vector<world::Family> held;
  for (const std::string& f : cfg.data.held_out) held.push_back(world::parse_family(f));
  const world::SplitBundle b = world::make_split(world::parse_protocol(cfg.data.protocol), held,
                                                 cfg.data.ratio, cfg.data.instances_per_spec,
                                                 cfg.seed);
  world::write_motion_jsonl(run_dir + "/pretrain_train.jsonl", b.pretrain_train);
  world::write_motion_jsonl(run_dir + "/pretrain_eval.jsonl", b.pretrain_eval);
  world::write_prompts_jsonl(run_dir + "/adapt_train.jsonl", b.adapt_train);
  world::write_prompts_jsonl(run_dir + "/adapt_eval.jsonl", b.adapt_eval);
  nlohmann::json meta{{"protocol", cfg.data.protocol},
                      {"held_out", cfg.data.held_out},
                      {"ratio", cfg.data.ratio},
                      {"instances_per_spec", cfg.data.instances_per_spec},
                      {"seed", cfg.seed},
                      {"counts",
                       {{"pretrain_train", b.pretrain_train.records.size()},
                        {"pretrain_eval", b.pretrain_eval.records.size()},
                        {"adapt_train", b.adapt_train.prompts.size()},
                        {"adapt_eval", b.adapt_eval.prompts.size()}}}};
  write_text(run_dir + "/meta.json", meta.dump(2) + "\n");
  std::cout << "dataset written to " << run_dir << "\n";
  return 0;
}

int cmd_pretrain(const RunConfig& cfg, const std::string& run_dir) {
  const world::SplitBundle data = load_dataset(cfg.paths.data_dir);
  const diff::NoiseSchedule schedule =
      diff::make_schedule(cfg.schedule.steps, diff::parse_schedule_kind(cfg.schedule.kind));
  const diff::Denoiser model(denoiser_config(cfg));
  ParamStore ps;
  ps.rng_seed = cfg.seed;
  Rng root(cfg.seed);
  Rng init = root.stream({0x64656e69ULL});
  model.init_params(ps, init);

  std::ofstream log(run_dir + "/log.jsonl");
  diff::PretrainConfig pc;
  pc.iters = cfg.pretrain.iters;
  pc.batch = cfg.pretrain.batch;
  pc.lr = cfg.pretrain.lr;
  pc.p_uncond = cfg.pretrain.p_uncond;
  pc.log_every = cfg.pretrain.log_every;
  Rng train_rng = root.stream({0x70726574ULL});
  const diff::PretrainResult res =
      diff::pretrain(model, ps, data.pretrain_train, data.pretrain_eval, schedule, pc, train_rng,
                     [&](int iter, double loss) {
                       log << nlohmann::json{{"iter", iter}, {"loss", loss}}.dump() << "\n";
                     });
  save_checkpoint(run_dir + "/denoiser.dmrl", "denoiser", ps, denoiser_meta(cfg));
  nlohmann::json summary{{"final_train_loss", res.final_train_loss},
                         {"eval_mse", res.eval_mse},
                         {"eval_mse_max", cfg.pretrain.eval_mse_max}};
  write_text(run_dir + "/summary.json", summary.dump(2) + "\n");
  std::cout << "pretrain done: eval_mse=" << res.eval_mse << " (bound " << cfg.pretrain.eval_mse_max
            << "), checkpoint " << run_dir << "/denoiser.dmrl\n";
  return 0;
}

int cmd_train_reward(const RunConfig& cfg, const std::string& run_dir) {
  // Retrieval encoders see the whole family grid; this is the only channel
  // through which target-domain knowledge reaches adaptation.
  const world::SplitBundle full =
      world::make_split(world::Protocol::kFull, {}, 0.8, cfg.reward.instances_per_spec,
                        hash_combine(cfg.seed, 0x72656e63ULL));
  std::ofstream log(run_dir + "/log.jsonl");
  nlohmann::json summary;
  Rng root(cfg.seed);

  const struct {
    const char* label;
    bool evaluator;
    uint64_t tag;
  } kinds[2] = {{"reward", false, 0x7265771ULL}, {"evaluator", true, 0x6576616cULL}};
  std::vector<uint64_t> checksums;
  for (const auto& k : kinds) {
    const reward::EncoderConfig ec = encoder_config(cfg, k.evaluator);
    const uint64_t init_seed = hash_combine(cfg.seed, k.tag);
    reward::DualEncoder enc(ec, init_seed);
    Rng train_rng = root.stream({k.tag});
    enc.train_contrastive(full.pretrain_train, cfg.reward.batch, cfg.reward.iters, cfg.reward.lr,
                          train_rng, [&](int iter, double loss) {
                            log << nlohmann::json{{"encoder", k.label},
                                                  {"iter", iter},
                                                  {"loss", loss}}.dump()
                                << "\n";
                          });
    Rng eval_rng = root.stream({k.tag, 0x65ULL});
    const double r1 = reward::retrieval_r1(enc, 32, 8, eval_rng);
    const double margin = reward::reward_margin(enc, 500, eval_rng);
    summary[std::string(k.label) + "_r1"] = r1;
    summary[std::string(k.label) + "_margin"] = margin;
    checksums.push_back(enc.checksum());
    save_checkpoint(run_dir + "/" + k.label + ".dmrl", k.label, enc.params(),
                    encoder_meta(ec, init_seed, cfg));
    std::cout << k.label << ": held-out R@1=" << r1 << " margin=" << margin << "\n";
  }
  // The measurement instrument must never be the optimization target.
  if (checksums[0] == checksums[1]) {
    throw std::runtime_error("reward and evaluator encoders are identical");
  }
  summary["retrieval_min"] = cfg.reward.retrieval_min;
  summary["margin_min"] = cfg.reward.margin_min;
  write_text(run_dir + "/summary.json", summary.dump(2) + "\n");
  return 0;
}

int cmd_finetune(const RunConfig& cfg, const std::string& run_dir) {
  const world::SplitBundle data = load_dataset(cfg.paths.data_dir);
  if (data.adapt_train.prompts.empty()) {
    throw std::runtime_error("finetune: dataset has no adaptation prompts");
  }
  const diff::NoiseSchedule schedule =
      diff::make_schedule(cfg.schedule.steps, diff::parse_schedule_kind(cfg.schedule.kind));
  const diff::SamplingChain chain = diff::make_chain(schedule, cfg.schedule.rl_steps);
  const diff::Denoiser model(denoiser_config(cfg));
  nlohmann::json dmeta;
  ParamStore ps = load_checkpoint(cfg.paths.denoiser, "denoiser", &dmeta);
  verify_denoiser_meta(dmeta, cfg, cfg.paths.denoiser);
  reward::DualEncoder reward_enc = load_encoder(cfg.paths.reward_enc, "reward");
  reward_enc.freeze();

  Rng root(cfg.seed);
  Rng lora_rng = root.stream({0x6c6f7261ULL});
  LoraSet lora = model.make_lora(ps, cfg.lora.rank, cfg.lora.alpha, lora_rng);

  ddpo::DdpoConfig dc;
  dc.max_iterations = cfg.ddpo.iterations;
  dc.n_prompts = cfg.ddpo.n_prompts;
  dc.replicas = cfg.ddpo.replicas;
  dc.update_epochs = cfg.ddpo.update_epochs;
  dc.clip_eps = cfg.ddpo.clip_eps;
  dc.lr = cfg.ddpo.lr;
  dc.minibatch = cfg.ddpo.minibatch;
  dc.grad_clip = cfg.ddpo.grad_clip;
  dc.kl_guard = cfg.ddpo.kl_guard;
  dc.cfg_scale = cfg.ddpo.cfg_scale;
  dc.checkpoint_every = cfg.ddpo.checkpoint_every;

  fs::create_directories(run_dir + "/checkpoints");
  std::ofstream log(run_dir + "/log.jsonl");
  nlohmann::json lmeta = denoiser_meta(cfg);
  lmeta["rank"] = cfg.lora.rank;
  lmeta["alpha"] = cfg.lora.alpha;

  ddpo::PolicyContext policy{&model, &ps, &lora};
  const ddpo::FinetuneResult res = ddpo::finetune(
      policy, reward_enc, data.adapt_train, dc, chain, root,
      [&](const ddpo::IterationLog& l) {
        log << nlohmann::json{{"iter", l.iter},
                              {"mean_reward", l.mean_reward},
                              {"std_reward", l.std_reward},
                              {"loss", l.loss},
                              {"clip_frac", l.clip_frac},
                              {"approx_kl", l.approx_kl},
                              {"wall_ms", l.wall_ms}}.dump()
            << "\n";
        log.flush();
      },
      [&](int iter) {
        char name[64];
        std::snprintf(name, sizeof(name), "/checkpoints/lora-%04d.dmrl", iter);
        save_lora_checkpoint(run_dir + name, lora, lmeta);
      });
  save_lora_checkpoint(run_dir + "/lora.dmrl", lora, lmeta);
  nlohmann::json summary{
      {"iterations", cfg.ddpo.iterations},
      {"first_mean_reward", res.log.empty() ? 0.0 : res.log.front().mean_reward},
      {"last_mean_reward", res.log.empty() ? 0.0 : res.log.back().mean_reward},
      {"resampled", res.total_resampled}};
  write_text(run_dir + "/summary.json", summary.dump(2) + "\n");
  std::cout << "finetune done: mean reward " << summary["first_mean_reward"] << " -> "
            << summary["last_mean_reward"] << "\n";
  return 0;
}

protocol::EvalConfig eval_config(const RunConfig& cfg) {
  protocol::EvalConfig ec;
  ec.sampler = cfg.eval.sampler;
  ec.fast_steps = cfg.eval.fast_steps;
  ec.rl_steps = cfg.schedule.rl_steps;
  ec.cfg_scale = cfg.eval.cfg_scale;
  ec.pool = cfg.eval.pool;
  ec.r_shuffles = cfg.eval.r_shuffles;
  ec.diversity_pairs = cfg.eval.diversity_pairs;
  ec.mmodality_prompts = cfg.eval.mmodality_prompts;
  ec.mmodality_repeats = cfg.eval.mmodality_repeats;
  return ec;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& run_dir, std::string protocol_arg) {
  const world::SplitBundle data = load_dataset(cfg.paths.data_dir);
  if (protocol_arg.empty()) protocol_arg = cfg.data.protocol;
  const protocol::ProtocolName pname = protocol::parse_protocol_name(protocol_arg);

  const diff::NoiseSchedule schedule =
      diff::make_schedule(cfg.schedule.steps, diff::parse_schedule_kind(cfg.schedule.kind));
  const diff::Denoiser model(denoiser_config(cfg));
  nlohmann::json dmeta;
  ParamStore ps = load_checkpoint(cfg.paths.denoiser, "denoiser", &dmeta);
  verify_denoiser_meta(dmeta, cfg, cfg.paths.denoiser);
  reward::DualEncoder evaluator = load_encoder(cfg.paths.evaluator, "evaluator");
  evaluator.freeze();

  LoraSet lora;
  const bool adapted = !cfg.paths.lora.empty();
  if (adapted) lora = load_lora_checkpoint(cfg.paths.lora);

  const protocol::ModelHandle pre{&model, &ps, nullptr};
  const protocol::ModelHandle post{&model, &ps, adapted ? &lora : nullptr};
  const protocol::ProtocolReports reports = protocol::run_protocol(
      pname, pre, post, data, evaluator, schedule, eval_config(cfg), cfg.seed);

  write_text(run_dir + "/report_pre.json", reports.pre.to_json() + "\n");
  write_text(run_dir + "/report_post.json", reports.post.to_json() + "\n");
  {
    std::ofstream curves(run_dir + "/curves.jsonl");
    nlohmann::json a = nlohmann::json::parse(reports.pre.to_json());
    a["checkpoint"] = "pre";
    a["protocol"] = protocol_arg;
    curves << a.dump() << "\n";
    nlohmann::json b = nlohmann::json::parse(reports.post.to_json());
    b["checkpoint"] = "post";
    b["protocol"] = protocol_arg;
    curves << b.dump() << "\n";
  }

  // A few qualitative trajectories from the evaluated checkpoint.
  fs::create_directories(run_dir + "/plots");
  const auto& prompts = pname == protocol::ProtocolName::kForgetting
                            ? [&] {
                                std::vector<world::PromptInstance> v;
                                for (const auto& r : data.pretrain_eval.records) v.push_back(r.prompt);
                                return v;
                              }()
                            : data.adapt_eval.prompts;
  Rng plot_rng(cfg.seed);
  const int n_plots = std::min<int>(4, static_cast<int>(prompts.size()));
  for (int i = 0; i < n_plots; ++i) {
    diff::Guided guided{diff::make_eps_fn(model, ps, adapted ? &lora : nullptr),
                        prompts[static_cast<size_t>(i)].tokens, cfg.eval.cfg_scale};
    Rng r = plot_rng.stream({0x706c6f74ULL, static_cast<uint64_t>(i)});
    const Tensor x0 = diff::sample_fast(guided, schedule, cfg.eval.fast_steps, r);
    world::MotionSequence m;
    m.frames.data.assign(x0.data.begin(), x0.data.end());
    char name[64];
    std::snprintf(name, sizeof(name), "/plots/sample-%02d.svg", i);
    write_trajectory_svg(run_dir + name, m, prompts[static_cast<size_t>(i)].tokens.text);
  }
  std::cout << "evaluate (" << protocol_arg << "): fid " << reports.pre.fid << " -> "
            << reports.post.fid << ", R@1 " << reports.pre.r_at_1 << " -> " << reports.post.r_at_1
            << "\n";
  return 0;
}

int cmd_generate(const RunConfig& cfg, const std::string& run_dir, const std::string& prompt,
                 std::string sampler, std::string out) {
  if (prompt.empty()) throw std::runtime_error("generate: --prompt is required");
  const world::PromptTokens tokens = world::tokenize(prompt);
  if (sampler.empty()) sampler = cfg.eval.sampler;
  if (out.empty()) out = run_dir + "/motion.svg";

  const diff::NoiseSchedule schedule =
      diff::make_schedule(cfg.schedule.steps, diff::parse_schedule_kind(cfg.schedule.kind));
  const diff::Denoiser model(denoiser_config(cfg));
  nlohmann::json dmeta;
  ParamStore ps = load_checkpoint(cfg.paths.denoiser, "denoiser", &dmeta);
  verify_denoiser_meta(dmeta, cfg, cfg.paths.denoiser);
  LoraSet lora;
  const bool adapted = !cfg.paths.lora.empty();
  if (adapted) lora = load_lora_checkpoint(cfg.paths.lora);

  diff::Guided guided{diff::make_eps_fn(model, ps, adapted ? &lora : nullptr), tokens,
                      cfg.eval.cfg_scale};
  Rng rng(cfg.seed);
  Tensor x0;
  if (sampler == "fast") {
    x0 = diff::sample_fast(guided, schedule, cfg.eval.fast_steps, rng);
  } else if (sampler == "ancestral") {
    const diff::SamplingChain chain = diff::make_chain(schedule, cfg.schedule.rl_steps);
    x0 = diff::sample_ancestral(guided, chain, rng, false).x0;
  } else {
    throw std::runtime_error("unknown sampler: '" + sampler + "'");
  }
  world::MotionSequence m;
  m.frames.data.assign(x0.data.begin(), x0.data.end());
  write_trajectory_svg(out, m, prompt);
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"desk-scale text-to-motion diffusion lab with RL fine-tuning"};
  app.require_subcommand(1);

  CommonArgs gen_data_args, pretrain_args, reward_args, finetune_args, evaluate_args, generate_args;
  std::string protocol_arg, prompt_arg, sampler_arg, out_arg;

  CLI::App* c_gen = app.add_subcommand("gen-data", "materialize dataset splits as JSONL");
  add_common(c_gen, gen_data_args);
  CLI::App* c_pre = app.add_subcommand("pretrain", "diffusion pretraining on the motion split");
  add_common(c_pre, pretrain_args);
  CLI::App* c_rew = app.add_subcommand("train-reward", "contrastive training of both encoders");
  add_common(c_rew, reward_args);
  CLI::App* c_fin = app.add_subcommand("finetune", "policy optimization on prompts only");
  add_common(c_fin, finetune_args);
  CLI::App* c_eva = app.add_subcommand("evaluate", "run an experiment protocol and write reports");
  add_common(c_eva, evaluate_args);
  c_eva->add_option("--protocol", protocol_arg, "cross-domain | leave-one-out | forgetting");
  CLI::App* c_gen1 = app.add_subcommand("generate", "sample one motion and plot it");
  add_common(c_gen1, generate_args);
  c_gen1->add_option("--prompt", prompt_arg, "prompt text (closed vocabulary)");
  c_gen1->add_option("--sampler", sampler_arg, "ancestral | fast");
  c_gen1->add_option("--out", out_arg, "output SVG path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (c_gen->parsed()) {
      const RunConfig cfg = resolve_config(gen_data_args);
      const std::string dir = make_run_dir(cfg, "gen-data", gen_data_args.run_dir);
      echo_config(cfg, dir);
      return cmd_gen_data(cfg, dir);
    }
    if (c_pre->parsed()) {
      const RunConfig cfg = resolve_config(pretrain_args);
      const std::string dir = make_run_dir(cfg, "pretrain", pretrain_args.run_dir);
      echo_config(cfg, dir);
      return cmd_pretrain(cfg, dir);
    }
    if (c_rew->parsed()) {
      const RunConfig cfg = resolve_config(reward_args);
      const std::string dir = make_run_dir(cfg, "train-reward", reward_args.run_dir);
      echo_config(cfg, dir);
      return cmd_train_reward(cfg, dir);
    }
    if (c_fin->parsed()) {
      const RunConfig cfg = resolve_config(finetune_args);
      const std::string dir = make_run_dir(cfg, "finetune", finetune_args.run_dir);
      echo_config(cfg, dir);
      return cmd_finetune(cfg, dir);
    }
    if (c_eva->parsed()) {
      const RunConfig cfg = resolve_config(evaluate_args);
      const std::string dir = make_run_dir(cfg, "evaluate", evaluate_args.run_dir);
      echo_config(cfg, dir);
      return cmd_evaluate(cfg, dir, protocol_arg);
    }
    if (c_gen1->parsed()) {
      const RunConfig cfg = resolve_config(generate_args);
      const std::string dir = make_run_dir(cfg, "generate", generate_args.run_dir);
      echo_config(cfg, dir);
      return cmd_generate(cfg, dir, prompt_arg, sampler_arg, out_arg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand\n";
  return 1;
}

}  // namespace dmrl::cli
