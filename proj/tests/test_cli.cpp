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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmrl/checkpoint.hpp"
#include "dmrl/cli.hpp"
#include "dmrl/config.hpp"

using namespace dmrl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

struct TempDir {
  fs::path root;
  TempDir() {
    root = fs::temp_directory_path() / ("dmrl_cli_" + std::to_string(::getpid()));
    fs::create_directories(root);
  }
  ~TempDir() { fs::remove_all(root); }
  std::string sub(const std::string& name) const { return (root / name).string(); }
};

// Tiny-budget overrides so the whole pipeline runs in seconds.
std::vector<std::string> tiny(const std::vector<std::string>& args) {
  std::vector<std::string> out = args;
  const char* overrides[] = {
      "model.hidden=32",        "model.blocks=1",
      "schedule.steps=20",      "schedule.rl_steps=5",
      "data.instances_per_spec=4",
      "pretrain.iters=80",      "pretrain.batch=8",
      "reward.iters=60",        "reward.batch=24",  "reward.instances_per_spec=2",
      "ddpo.iterations=2",      "ddpo.n_prompts=4", "ddpo.replicas=2",
      "ddpo.minibatch=20",      "ddpo.checkpoint_every=1",
      "eval.mmodality_prompts=2", "eval.mmodality_repeats=3", "eval.r_shuffles=2",
      "eval.pool=8",            "eval.diversity_pairs=50",
  };
  for (const char* o : overrides) {
    out.push_back("--set");
    out.push_back(o);
  }
  return out;
}

}  // namespace

TEST_CASE("checkpoint round trip within f32 quantization, kind checked first") {
  TempDir tmp;
  ParamStore ps;
  Rng rng(1);
  Tensor& w = ps.add("m.W", {8, 5});
  for (double& v : w.data) v = 3.0 * rng.gaussian();
  Tensor& b = ps.add("m.b", {8});
  for (double& v : b.data) v = rng.gaussian();

  const std::string path = tmp.sub("test.dmrl");
  save_checkpoint(path, "denoiser", ps, {{"note", 42}});
  nlohmann::json meta;
  const ParamStore back = load_checkpoint(path, "denoiser", &meta);
  CHECK(meta.at("note").get<int>() == 42);
  REQUIRE(back.entries.size() == 2);
  for (const auto& [name, t] : ps.entries) {
    const Tensor& r = back.get(name);
    REQUIRE(r.same_shape(t));
    for (int64_t i = 0; i < t.numel(); ++i) {
      const double denom = std::max(std::abs(t[i]), 1e-12);
      CHECK(std::abs(r[i] - t[i]) / denom <= 1e-6);
    }
  }
  // Wrong kind fails before any tensor is materialized.
  CHECK_THROWS_WITH(load_checkpoint(path, "reward", nullptr), doctest::Contains("kind"));
  // Header corruption is caught.
  {
    std::string bytes = slurp(path);
    bytes[12] ^= 0x40;
    std::ofstream os(tmp.sub("bad.dmrl"), std::ios::binary);
    os << bytes;
  }
  CHECK_THROWS(load_checkpoint(tmp.sub("bad.dmrl"), "denoiser", nullptr));
}

TEST_CASE("lora checkpoint round trip") {
  TempDir tmp;
  Rng rng(2);
  LoraSet set;
  set.adapters.push_back(LoraAdapter::init("den.cond.W", 16, 12, 4, 16.0, rng));
  for (double& v : set.adapters[0].B.data) v = rng.gaussian();
  save_lora_checkpoint(tmp.sub("l.dmrl"), set, {});
  const LoraSet back = load_lora_checkpoint(tmp.sub("l.dmrl"));
  REQUIRE(back.adapters.size() == 1);
  CHECK(back.adapters[0].target == "den.cond.W");
  CHECK(back.adapters[0].rank == 4);
  CHECK(back.adapters[0].alpha == 16.0);
  for (int64_t i = 0; i < set.adapters[0].B.numel(); ++i) {
    CHECK(std::abs(back.adapters[0].B[i] - set.adapters[0].B[i]) <=
          1e-6 * std::max(1.0, std::abs(set.adapters[0].B[i])));
  }
}

TEST_CASE("config: defaults round trip, unknown keys rejected, overrides typed") {
  const RunConfig def = RunConfig::defaults();
  const RunConfig back = RunConfig::from_json(def.to_json());
  CHECK(back.to_json() == def.to_json());

  nlohmann::json bad = def.to_json();
  bad["ddpo"]["learning_rate"] = 0.1;  // unknown key
  CHECK_THROWS_WITH(RunConfig::from_json(bad), doctest::Contains("unknown key"));

  RunConfig cfg = RunConfig::defaults();
  cfg.set_override("ddpo.lr=0.005");
  CHECK(cfg.ddpo.lr == 0.005);
  cfg.set_override("schedule.kind=cosine");
  CHECK(cfg.schedule.kind == "cosine");
  cfg.set_override("data.held_out=[\"zigzag\"]");
  REQUIRE(cfg.data.held_out.size() == 1);
  CHECK(cfg.data.held_out[0] == "zigzag");
  CHECK_THROWS(cfg.set_override("nonsense.key=1"));
  CHECK_THROWS(cfg.set_override("no-equals-sign"));
}

TEST_CASE("gen-data writes splits and meta; rerun from echo is byte-identical") {
  TempDir tmp;
  const std::string d1 = tmp.sub("data1");
  CHECK(cli::run(tiny({"gen-data", "--run-dir", d1, "--seed", "11"})) == 0);
  for (const char* f : {"pretrain_train.jsonl", "pretrain_eval.jsonl", "adapt_train.jsonl",
                        "adapt_eval.jsonl", "meta.json", "config.json"}) {
    CHECK(fs::exists(fs::path(d1) / f));
  }
  const nlohmann::json meta = nlohmann::json::parse(slurp(d1 + "/meta.json"));
  CHECK(meta.at("counts").at("adapt_train").get<int>() +
            meta.at("counts").at("adapt_eval").get<int>() ==
        2 * 6 * 4);

  // Re-run purely from the echoed config.
  const std::string d2 = tmp.sub("data2");
  CHECK(cli::run({"gen-data", "--config", d1 + "/config.json", "--run-dir", d2}) == 0);
  for (const char* f : {"pretrain_train.jsonl", "pretrain_eval.jsonl", "adapt_train.jsonl",
                        "adapt_eval.jsonl", "meta.json"}) {
    CHECK(slurp(d1 + "/" + f) == slurp(d2 + "/" + f));
  }
}

TEST_CASE("generate rejects out-of-vocabulary words with a named diagnostic") {
  TempDir tmp;
  const std::string data = tmp.sub("data");
  REQUIRE(cli::run(tiny({"gen-data", "--run-dir", data, "--seed", "3"})) == 0);
  const std::string pre = tmp.sub("pre");
  REQUIRE(cli::run(tiny({"pretrain", "--run-dir", pre, "--seed", "3", "--set",
                         "paths.data_dir=" + data})) == 0);
  const int rc = cli::run(tiny({"generate", "--run-dir", tmp.sub("gen"), "--seed", "3", "--set",
                                "paths.denoiser=" + pre + "/denoiser.dmrl", "--prompt",
                                "a person pirouettes"}));
  CHECK(rc == 1);
}

TEST_CASE("full pipeline smoke: all artifacts, deterministic reports") {
  TempDir tmp;
  const std::string data = tmp.sub("data");
  REQUIRE(cli::run(tiny({"gen-data", "--run-dir", data, "--seed", "7"})) == 0);

  const std::string pre = tmp.sub("pretrain");
  REQUIRE(cli::run(tiny({"pretrain", "--run-dir", pre, "--seed", "7", "--set",
                         "paths.data_dir=" + data})) == 0);
  CHECK(fs::exists(fs::path(pre) / "denoiser.dmrl"));
  CHECK(fs::exists(fs::path(pre) / "log.jsonl"));
  CHECK(fs::exists(fs::path(pre) / "summary.json"));

  const std::string rew = tmp.sub("reward");
  REQUIRE(cli::run(tiny({"train-reward", "--run-dir", rew, "--seed", "7"})) == 0);
  CHECK(fs::exists(fs::path(rew) / "reward.dmrl"));
  CHECK(fs::exists(fs::path(rew) / "evaluator.dmrl"));

  const std::string fin = tmp.sub("finetune");
  REQUIRE(cli::run(tiny({"finetune", "--run-dir", fin, "--seed", "7", "--set",
                         "paths.data_dir=" + data, "--set",
                         "paths.denoiser=" + pre + "/denoiser.dmrl", "--set",
                         "paths.reward_enc=" + rew + "/reward.dmrl"})) == 0);
  CHECK(fs::exists(fs::path(fin) / "lora.dmrl"));
  CHECK(fs::exists(fs::path(fin) / "checkpoints/lora-0001.dmrl"));
  // One JSONL line per iteration with the full field set.
  {
    std::istringstream lines(slurp(fin + "/log.jsonl"));
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
      const nlohmann::json j = nlohmann::json::parse(line);
      for (const char* key :
           {"iter", "mean_reward", "std_reward", "loss", "clip_frac", "approx_kl", "wall_ms"}) {
        CHECK(j.contains(key));
      }
      CHECK(j.at("iter").get<int>() == n);
      ++n;
    }
    CHECK(n == 2);
  }

  auto eval_args = [&](const std::string& dir) {
    return tiny({"evaluate", "--run-dir", dir, "--seed", "7", "--protocol", "leave-one-out",
                 "--set", "paths.data_dir=" + data, "--set",
                 "paths.denoiser=" + pre + "/denoiser.dmrl", "--set",
                 "paths.evaluator=" + rew + "/evaluator.dmrl", "--set",
                 "paths.lora=" + fin + "/lora.dmrl"});
  };
  const std::string ev1 = tmp.sub("eval1"), ev2 = tmp.sub("eval2");
  REQUIRE(cli::run(eval_args(ev1)) == 0);
  REQUIRE(cli::run(eval_args(ev2)) == 0);
  for (const char* f : {"report_pre.json", "report_post.json", "curves.jsonl"}) {
    CHECK(fs::exists(fs::path(ev1) / f));
    CHECK(slurp(ev1 + "/" + f) == slurp(ev2 + "/" + f));  // byte-identical rerun
  }
  CHECK(fs::exists(fs::path(ev1) / "plots/sample-00.svg"));

  // Forgetting protocol evaluates on the pretraining split.
  const std::string ev3 = tmp.sub("eval3");
  std::vector<std::string> forget = eval_args(ev3);
  for (auto& a : forget) {
    if (a == "leave-one-out") a = "forgetting";
  }
  REQUIRE(cli::run(forget) == 0);
  CHECK(fs::exists(fs::path(ev3) / "report_post.json"));

  const std::string gen = tmp.sub("generate");
  REQUIRE(cli::run(tiny({"generate", "--run-dir", gen, "--seed", "7", "--set",
                         "paths.denoiser=" + pre + "/denoiser.dmrl", "--set",
                         "paths.lora=" + fin + "/lora.dmrl", "--prompt",
                         "a person walks in a large circle clockwise steadily", "--sampler",
                         "fast", "--out", gen + "/plot.svg"})) == 0);
  const std::string svg = slurp(gen + "/plot.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("circle clockwise") != std::string::npos);

  // Denoiser checkpoint refuses to load where an encoder is expected.
  const int rc = cli::run(tiny({"evaluate", "--run-dir", tmp.sub("eval4"), "--seed", "7",
                                "--protocol", "leave-one-out", "--set", "paths.data_dir=" + data,
                                "--set", "paths.denoiser=" + pre + "/denoiser.dmrl", "--set",
                                "paths.evaluator=" + pre + "/denoiser.dmrl"}));
  CHECK(rc == 1);
}

TEST_CASE("schedule metadata mismatches are rejected before compute") {
  TempDir tmp;
  const std::string data = tmp.sub("data");
  REQUIRE(cli::run(tiny({"gen-data", "--run-dir", data, "--seed", "9"})) == 0);
  const std::string pre = tmp.sub("pre");
  REQUIRE(cli::run(tiny({"pretrain", "--run-dir", pre, "--seed", "9", "--set",
                         "paths.data_dir=" + data})) == 0);
  // Same checkpoint, different schedule length in the config.
  std::vector<std::string> args = tiny({"generate", "--run-dir", tmp.sub("g"), "--seed", "9",
                                        "--set", "paths.denoiser=" + pre + "/denoiser.dmrl",
                                        "--prompt", "a person stands still slowly holding a small pose"});
  for (auto& a : args) {
    if (a == "schedule.steps=20") a = "schedule.steps=40";
  }
  CHECK(cli::run(args) == 1);
}
