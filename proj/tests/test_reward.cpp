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
#include <cstring>

#include "dmrl/kernels.hpp"
#include "dmrl/metrics.hpp"
#include "dmrl/reward.hpp"

using namespace dmrl;
using namespace dmrl::reward;

namespace {
DualEncoder small_encoder(uint64_t seed) {
  EncoderConfig cfg;
  cfg.emb = 16;
  cfg.motion_hidden = {48, 32};
  cfg.text_hidden = {32};
  cfg.token_emb = 16;
  return DualEncoder(cfg, seed);
}

world::MotionSplit tiny_dataset(int per_spec, uint64_t seed) {
  const world::SplitBundle b = world::make_split(world::Protocol::kFull, {}, 0.8, per_spec, seed);
  return b.pretrain_train;
}
}  // namespace

TEST_CASE("embeddings are unit norm and deterministic") {
  const DualEncoder enc = small_encoder(3);
  Rng rng(4);
  const world::MotionSequence m =
      world::gen_motion({world::Family::kZigzag, world::Speed::kFast, world::SizeClass::kLarge}, rng);
  const auto e1 = enc.encode_motion(m);
  const auto e2 = enc.encode_motion(m);
  CHECK(std::memcmp(e1.data(), e2.data(), e1.size() * sizeof(double)) == 0);
  double n = 0.0;
  for (double v : e1) n += v * v;
  CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-10);

  const auto t1 = enc.encode_text(world::tokenize("a person walks east in a small straight line quickly"));
  double nt = 0.0;
  for (double v : t1) nt += v * v;
  CHECK(std::abs(std::sqrt(nt) - 1.0) < 1e-10);
}

TEST_CASE("identical unit embeddings score exactly 1, orthogonal ones 0") {
  const DualEncoder enc = small_encoder(5);
  Rng rng(6);
  const world::MotionSequence m = world::gen_motion(
      {world::Family::kSpinLeft, world::Speed::kSlow, world::SizeClass::kSmall}, rng);
  const auto e = enc.encode_motion(m);
  const double self = nk::serial::dot(e.data(), e.data(), static_cast<int>(e.size()));
  CHECK(self == doctest::Approx(1.0).epsilon(1e-10));

  std::vector<double> a(16, 0.0), b(16, 0.0);
  a[0] = 1.0;
  b[1] = 1.0;
  CHECK(nk::serial::dot(a.data(), b.data(), 16) == 0.0);
}

TEST_CASE("reward stays in [-1, 1]") {
  const DualEncoder enc = small_encoder(7);
  Rng rng(8);
  for (const auto& spec : world::all_specs()) {
    Rng r = rng.stream({static_cast<uint64_t>(spec.family)});
    const world::MotionSequence m = world::gen_motion(spec, r);
    const double s = score(enc, m, world::tokenize(world::render_prompt(spec)));
    CHECK(s <= 1.0);
    CHECK(s >= -1.0);
  }
}

TEST_CASE("infonce: batch of one is exactly zero loss") {
  const std::vector<double> logits = {3.7};
  CHECK(symmetric_infonce(logits, 1, nullptr) == 0.0);
}

TEST_CASE("infonce: perfectly aligned embeddings at tiny temperature give vanishing loss") {
  // logits = I / tau; as tau -> 0 the diagonal dominates and the loss -> 0.
  for (double tau : {0.5, 0.05, 0.005}) {
    const int b = 8;
    std::vector<double> logits(b * b, 0.0);
    for (int i = 0; i < b; ++i) logits[static_cast<size_t>(i * b + i)] = 1.0 / tau;
    const double loss = symmetric_infonce(logits, b, nullptr);
    CHECK(loss >= 0.0);
    if (tau <= 0.005) CHECK(loss < 1e-8);
  }
}

TEST_CASE("infonce gradient matches finite differences") {
  Rng rng(9);
  const int b = 5;
  std::vector<double> logits(b * b);
  for (double& v : logits) v = rng.gaussian();
  std::vector<double> grad;
  symmetric_infonce(logits, b, &grad);
  for (int i = 0; i < b * b; ++i) {
    const double h = 1e-6;
    std::vector<double> up = logits, dn = logits;
    up[static_cast<size_t>(i)] += h;
    dn[static_cast<size_t>(i)] -= h;
    const double fd =
        (symmetric_infonce(up, b, nullptr) - symmetric_infonce(dn, b, nullptr)) / (2 * h);
    CHECK(grad[static_cast<size_t>(i)] == doctest::Approx(fd).epsilon(1e-4));
  }
}

TEST_CASE("encoder backward matches finite differences through the loss") {
  DualEncoder enc = small_encoder(10);
  Rng rng(11);
  const world::MotionSequence m = world::gen_motion(
      {world::Family::kFigureEight, world::Speed::kMedium, world::SizeClass::kLarge}, rng);
  std::vector<double> dir(16);
  for (double& v : dir) v = rng.gaussian();

  DualEncoder::MotionCache cache;
  enc.encode_motion_cached(m.frames, cache);
  GradStore gs;
  enc.backward_motion(cache, dir.data(), gs);

  auto loss_fn = [&] {
    const auto e = enc.encode_motion(m);
    return nk::serial::dot(e.data(), dir.data(), 16);
  };
  for (auto& [name, g] : gs.entries) {
    Tensor& p = enc.params().get(name);
    for (int64_t i = 0; i < std::min<int64_t>(p.numel(), 40); ++i) {
      const double keep = p[i];
      const double h = 1e-6;
      p[i] = keep + h;
      const double up = loss_fn();
      p[i] = keep - h;
      const double dn = loss_fn();
      p[i] = keep;
      const double fd = (up - dn) / (2 * h);
      const bool ok = std::abs(fd - g[i]) < 1e-8 ||
                      std::abs(fd - g[i]) / std::max(std::abs(fd), std::abs(g[i])) < 1e-4;
      CHECK(ok);
    }
  }
}

TEST_CASE("contrastive training separates families and ranks matched pairs first") {
  DualEncoder enc = small_encoder(12);
  const world::MotionSplit data = tiny_dataset(10, 13);
  Rng rng(14);
  const auto stats = enc.train_contrastive(data, 48, 500, 2e-3, rng);
  CHECK(stats.final_loss < 1.0);
  enc.freeze();

  // Same-family pairs score higher than cross-family on average.
  Rng eval_rng(15);
  double same = 0.0, cross = 0.0;
  const int reps = 200;
  for (int i = 0; i < reps; ++i) {
    Rng r = eval_rng.stream({static_cast<uint64_t>(i)});
    const int fa = r.uniform_int(0, world::kFamilyCount - 1);
    int fb = r.uniform_int(0, world::kFamilyCount - 2);
    if (fb >= fa) ++fb;
    const world::PromptSpec sa{static_cast<world::Family>(fa), world::Speed::kMedium,
                               world::SizeClass::kLarge};
    const world::PromptSpec sb{static_cast<world::Family>(fb), world::Speed::kMedium,
                               world::SizeClass::kLarge};
    const auto ma = enc.encode_motion(world::gen_motion(sa, r));
    const auto mb = enc.encode_motion(world::gen_motion(sa, r));
    const auto mc = enc.encode_motion(world::gen_motion(sb, r));
    same += nk::serial::dot(ma.data(), mb.data(), 16);
    cross += nk::serial::dot(ma.data(), mc.data(), 16);
  }
  CHECK(same / reps > cross / reps);

  Rng r1(16);
  const double r_at_1 = retrieval_r1(enc, 32, 4, r1);
  INFO("held-out 32-way R@1 = ", r_at_1);
  CHECK(r_at_1 > 0.6);

  Rng r2(17);
  const double margin = reward_margin(enc, 300, r2);
  INFO("matched-vs-mismatched margin = ", margin);
  CHECK(margin > 0.2);

  // Calibration: ground truth fed as "generated" scores near-zero Frechet
  // distance against an independent ground-truth draw, and retrieval sits
  // near the encoder's intrinsic score.
  const int n = 96, e = enc.config().emb;
  Tensor gen_feats({n, e}), ref_feats({n, e}), text_feats({n, e});
  const auto specs = world::all_specs();
  Rng cal(18);
  for (int i = 0; i < n; ++i) {
    const world::PromptSpec& spec = specs[static_cast<size_t>(i) % specs.size()];
    Rng g1 = cal.stream({1, static_cast<uint64_t>(i)});
    Rng g2 = cal.stream({2, static_cast<uint64_t>(i)});
    const auto mf = enc.encode_motion(world::gen_motion(spec, g1));
    const auto rf = enc.encode_motion(world::gen_motion(spec, g2));
    const auto tf = enc.encode_text(world::tokenize(world::render_prompt(spec)));
    for (int j = 0; j < e; ++j) {
      gen_feats.at2(i, j) = mf[static_cast<size_t>(j)];
      ref_feats.at2(i, j) = rf[static_cast<size_t>(j)];
      text_feats.at2(i, j) = tf[static_cast<size_t>(j)];
    }
  }
  const double fid = metrics::frechet(gen_feats, ref_feats);
  INFO("ground-truth-vs-ground-truth fid = ", fid);
  CHECK(fid < 0.1);
  Rng rp(19);
  const double gt_r1 = metrics::r_precision(gen_feats, text_feats, 32, 1, 4, rp);
  CHECK(gt_r1 > 0.5);  // near the encoder's intrinsic retrieval accuracy
}

TEST_CASE("freeze contract: scoring leaves the checksum unchanged, training refuses") {
  DualEncoder enc = small_encoder(18);
  enc.freeze();
  const uint64_t sum = enc.checksum();
  Rng rng(19);
  const world::MotionSequence m = world::gen_motion(
      {world::Family::kLineWest, world::Speed::kSlow, world::SizeClass::kSmall}, rng);
  score(enc, m, world::tokenize(world::render_prompt(
                    {world::Family::kLineWest, world::Speed::kSlow, world::SizeClass::kSmall})));
  CHECK(enc.checksum() == sum);
  const world::MotionSplit data = tiny_dataset(2, 20);
  Rng trng(21);
  CHECK_THROWS(enc.train_contrastive(data, 8, 1, 1e-3, trng));
}

TEST_CASE("training requires motion access") {
  DualEncoder enc = small_encoder(22);
  world::MotionSplit empty;
  Rng rng(23);
  CHECK_THROWS(enc.train_contrastive(empty, 8, 1, 1e-3, rng));
}
