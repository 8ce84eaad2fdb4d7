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

#include <cmath>
#include <filesystem>
#include <map>
#include <set>

#include "dmrl/synthworld.hpp"

using namespace dmrl;
using namespace dmrl::world;

TEST_CASE("ground truth invariants: finiteness, heading norm, channel bounds") {
  Rng rng(1);
  for (const PromptSpec& spec : all_specs()) {
    for (int i = 0; i < 20; ++i) {
      Rng r = rng.stream({static_cast<uint64_t>(spec.family), static_cast<uint64_t>(i)});
      const MotionSequence m = gen_motion(spec, r);
      CHECK(m.frames.all_finite());
      for (int t = 0; t < kFrames; ++t) {
        const double hs = m.at(t, kHeadSin), hc = m.at(t, kHeadCos);
        const double n = hs * hs + hc * hc;
        CHECK(n > 0.99);
        CHECK(n < 1.01);
        for (int c = 0; c < kChannels; ++c) {
          CHECK(std::abs(m.at(t, c)) <= 3.0);
        }
      }
    }
  }
}

TEST_CASE("stand-still root moves less than 0.02 per frame") {
  Rng rng(2);
  for (int s = 0; s < 3; ++s) {
    for (int i = 0; i < 30; ++i) {
      PromptSpec spec{Family::kStandStill, static_cast<Speed>(s), SizeClass::kLarge};
      Rng r = rng.stream({static_cast<uint64_t>(s), static_cast<uint64_t>(i)});
      const MotionSequence m = gen_motion(spec, r);
      for (int t = 1; t < kFrames; ++t) {
        const double dx = m.at(t, kRootX) - m.at(t - 1, kRootX);
        const double dy = m.at(t, kRootY) - m.at(t - 1, kRootY);
        CHECK(std::sqrt(dx * dx + dy * dy) < 0.02);
      }
    }
  }
}

TEST_CASE("circle orientation matches the shoelace sign") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    Rng r1 = rng.stream({1, static_cast<uint64_t>(i)});
    const MotionSequence cw =
        gen_motion({Family::kCircleCw, Speed::kMedium, SizeClass::kLarge}, r1);
    CHECK(signed_area(cw) < 0.0);
    Rng r2 = rng.stream({2, static_cast<uint64_t>(i)});
    const MotionSequence ccw =
        gen_motion({Family::kCircleCcw, Speed::kMedium, SizeClass::kLarge}, r2);
    CHECK(signed_area(ccw) > 0.0);
  }
}

TEST_CASE("fast lines are longer than slow lines on average") {
  Rng rng(4);
  double fast = 0.0, slow = 0.0;
  for (int i = 0; i < 100; ++i) {
    Rng r1 = rng.stream({1, static_cast<uint64_t>(i)});
    fast += path_length(gen_motion({Family::kLineNorth, Speed::kFast, SizeClass::kLarge}, r1));
    Rng r2 = rng.stream({2, static_cast<uint64_t>(i)});
    slow += path_length(gen_motion({Family::kLineNorth, Speed::kSlow, SizeClass::kLarge}, r2));
  }
  CHECK(fast > slow);
}

TEST_CASE("prompt templates: family words present, full grid distinct") {
  const std::string text = render_prompt({Family::kCircleCw, Speed::kMedium, SizeClass::kLarge});
  CHECK(text.find("circle") != std::string::npos);
  CHECK(text.find("clockwise") != std::string::npos);

  std::set<std::array<int32_t, kPromptLen>> seen;
  for (const PromptSpec& spec : all_specs()) {
    const PromptTokens toks = tokenize(render_prompt(spec));
    for (int32_t id : toks.ids) {
      CHECK(id >= 0);
      CHECK(id < Vocab::instance().size());
    }
    seen.insert(toks.ids);
  }
  CHECK(seen.size() == 72);
}

TEST_CASE("tokenize is deterministic and rejects unknown words") {
  const PromptTokens a = tokenize("a person walks in a small circle clockwise slowly");
  const PromptTokens b = tokenize("a person walks in a small circle clockwise slowly");
  CHECK(a.ids == b.ids);
  CHECK_THROWS_WITH(tokenize("a person moonwalks"), doctest::Contains("moonwalks"));
}

TEST_CASE("null prompt is reserved and distinct from every template") {
  const PromptTokens null = null_prompt();
  CHECK(is_null_prompt(null));
  for (const PromptSpec& spec : all_specs()) {
    CHECK_FALSE(is_null_prompt(tokenize(render_prompt(spec))));
  }
}

TEST_CASE("leave-one-out split: 80-20, disjoint, prompts-only adaptation") {
  const std::vector<Family> held = {Family::kCircleCw, Family::kCircleCcw};
  const SplitBundle b = make_split(Protocol::kLeaveOneOut, held, 0.8, 40, 7);
  // 2 families x 6 variants x 40 instances = 480 held-out prompt instances.
  CHECK(b.adapt_train.prompts.size() == 384);
  CHECK(b.adapt_eval.prompts.size() == 96);
  for (const auto& p : b.adapt_train.prompts) {
    CHECK((p.spec.family == Family::kCircleCw || p.spec.family == Family::kCircleCcw));
  }
  // Disjoint at the instance level.
  std::set<std::pair<std::string, int>> train_ids;
  for (const auto& p : b.adapt_train.prompts) train_ids.insert({p.tokens.text, p.instance_id});
  for (const auto& p : b.adapt_eval.prompts) {
    CHECK(train_ids.count({p.tokens.text, p.instance_id}) == 0);
  }
  // Pretraining never sees the held-out families.
  for (const auto& r : b.pretrain_train.records) {
    CHECK(r.prompt.spec.family != Family::kCircleCw);
    CHECK(r.prompt.spec.family != Family::kCircleCcw);
  }
}

TEST_CASE("full protocol: everything in train, eval empty") {
  const SplitBundle b = make_split(Protocol::kFull, {}, 0.8, 5, 1);
  CHECK(b.pretrain_train.records.size() == 72u * 5u);
  CHECK(b.pretrain_eval.records.empty());
  CHECK(b.adapt_train.prompts.empty());
  CHECK(b.adapt_eval.prompts.empty());
}

TEST_CASE("cross-domain groups partition the families") {
  const auto a = locomotion_families();
  const auto b = limb_posture_families();
  CHECK(a.size() + b.size() == kFamilyCount);
  std::set<int> seen;
  for (Family f : a) seen.insert(static_cast<int>(f));
  for (Family f : b) {
    CHECK(seen.count(static_cast<int>(f)) == 0);
    seen.insert(static_cast<int>(f));
  }
  CHECK(seen.size() == kFamilyCount);

  const SplitBundle bundle = make_split(Protocol::kCrossDomain, {}, 0.8, 4, 3);
  std::set<int> group_b;
  for (Family f : b) group_b.insert(static_cast<int>(f));
  for (const auto& r : bundle.pretrain_train.records) {
    CHECK(group_b.count(static_cast<int>(r.prompt.spec.family)) == 0);
  }
  for (const auto& p : bundle.adapt_train.prompts) {
    CHECK(group_b.count(static_cast<int>(p.spec.family)) == 1);
  }
}

TEST_CASE("make_split rejects bad arguments") {
  CHECK_THROWS(make_split(Protocol::kLeaveOneOut, {}, 0.8, 4, 1));
  std::vector<Family> all;
  for (int f = 0; f < kFamilyCount; ++f) all.push_back(static_cast<Family>(f));
  CHECK_THROWS(make_split(Protocol::kLeaveOneOut, all, 0.8, 4, 1));
  CHECK_THROWS(make_split(Protocol::kLeaveOneOut, {Family::kZigzag}, 1.5, 4, 1));
}

TEST_CASE("generator statistics stable across seeds") {
  for (int f = 0; f < kFamilyCount; ++f) {
    double len1 = 0.0, len2 = 0.0;
    const int n = 1000;
    Rng rng1(100), rng2(200);
    for (int i = 0; i < n; ++i) {
      PromptSpec spec{static_cast<Family>(f), static_cast<Speed>(i % 3),
                      static_cast<SizeClass>(i % 2)};
      Rng r1 = rng1.stream({static_cast<uint64_t>(i)});
      Rng r2 = rng2.stream({static_cast<uint64_t>(i)});
      len1 += path_length(gen_motion(spec, r1));
      len2 += path_length(gen_motion(spec, r2));
    }
    len1 /= n;
    len2 /= n;
    INFO("family ", family_name(static_cast<Family>(f)));
    CHECK(std::abs(len1 - len2) / std::max(len1, 1e-9) < 0.05);
  }
}

TEST_CASE("families are separable by a nearest-centroid classifier") {
  // Centroids from 200 samples per family, scored on 200 held-out ones.
  const int n_train = 200, n_test = 200;
  Rng rng(5);
  std::vector<std::vector<double>> centroids(kFamilyCount,
                                             std::vector<double>(kMotionDim, 0.0));
  for (int f = 0; f < kFamilyCount; ++f) {
    for (int i = 0; i < n_train; ++i) {
      PromptSpec spec{static_cast<Family>(f), static_cast<Speed>(i % 3),
                      static_cast<SizeClass>(i % 2)};
      Rng r = rng.stream({1, static_cast<uint64_t>(f), static_cast<uint64_t>(i)});
      const MotionSequence m = gen_motion(spec, r);
      for (int d = 0; d < kMotionDim; ++d) {
        centroids[static_cast<size_t>(f)][static_cast<size_t>(d)] += m.frames[d];
      }
    }
    for (double& v : centroids[static_cast<size_t>(f)]) v /= n_train;
  }
  int correct = 0, total = 0;
  for (int f = 0; f < kFamilyCount; ++f) {
    for (int i = 0; i < n_test; ++i) {
      PromptSpec spec{static_cast<Family>(f), static_cast<Speed>(i % 3),
                      static_cast<SizeClass>(i % 2)};
      Rng r = rng.stream({2, static_cast<uint64_t>(f), static_cast<uint64_t>(i)});
      const MotionSequence m = gen_motion(spec, r);
      int best = -1;
      double best_d = 1e300;
      for (int g = 0; g < kFamilyCount; ++g) {
        double d = 0.0;
        for (int j = 0; j < kMotionDim; ++j) {
          const double diff = m.frames[j] - centroids[static_cast<size_t>(g)][static_cast<size_t>(j)];
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = g;
        }
      }
      if (best == f) ++correct;
      ++total;
    }
  }
  const double acc = static_cast<double>(correct) / total;
  INFO("nearest-centroid accuracy ", acc);
  CHECK(acc > 0.95);
}

TEST_CASE("jsonl round trip preserves prompts and frames") {
  namespace fs = std::filesystem;
  const SplitBundle b = make_split(Protocol::kLeaveOneOut, {Family::kZigzag}, 0.8, 3, 11);
  const std::string dir = (fs::temp_directory_path() / "dmrl_synth_test").string();
  fs::create_directories(dir);

  write_motion_jsonl(dir + "/m.jsonl", b.pretrain_train);
  const MotionSplit m2 = read_motion_jsonl(dir + "/m.jsonl");
  REQUIRE(m2.records.size() == b.pretrain_train.records.size());
  for (size_t i = 0; i < m2.records.size(); ++i) {
    CHECK(m2.records[i].prompt.tokens.ids == b.pretrain_train.records[i].prompt.tokens.ids);
    for (int j = 0; j < kMotionDim; ++j) {
      CHECK(m2.records[i].motion.frames[j] == b.pretrain_train.records[i].motion.frames[j]);
    }
  }

  write_prompts_jsonl(dir + "/p.jsonl", b.adapt_train);
  const PromptOnlySplit p2 = read_prompts_jsonl(dir + "/p.jsonl");
  REQUIRE(p2.prompts.size() == b.adapt_train.prompts.size());
  for (size_t i = 0; i < p2.prompts.size(); ++i) {
    CHECK(p2.prompts[i].tokens.ids == b.adapt_train.prompts[i].tokens.ids);
  }

  // A prompt-only reader refuses records that carry frames.
  CHECK_THROWS(read_prompts_jsonl(dir + "/m.jsonl"));
  fs::remove_all(dir);
}
