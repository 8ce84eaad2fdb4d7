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

#include "dmrl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dmrl/kernels.hpp"

namespace dmrl::protocol {

namespace {

Tensor generate_one(const ModelHandle& handle, const world::PromptTokens& tokens,
                    const diff::NoiseSchedule& schedule, const EvalConfig& cfg, Rng rng) {
  diff::Guided guided{diff::make_eps_fn(*handle.model, *handle.params, handle.lora), tokens,
                      cfg.cfg_scale};
  if (cfg.sampler == "fast") {
    return diff::sample_fast(guided, schedule, cfg.fast_steps, rng);
  }
  if (cfg.sampler == "ancestral") {
    const diff::SamplingChain chain = diff::make_chain(schedule, cfg.rl_steps);
    return diff::sample_ancestral(guided, chain, rng, false).x0;
  }
  throw std::runtime_error("unknown sampler: '" + cfg.sampler + "'");
}

}  // namespace

std::vector<world::MotionSequence> reference_motions(
    const std::vector<world::PromptInstance>& prompts, uint64_t seed) {
  Rng root(seed);
  std::vector<world::MotionSequence> out(prompts.size());
  nk::parallel_for(static_cast<int64_t>(prompts.size()), [&](int64_t i) {
    Rng r = root.stream({0x72656631ULL, static_cast<uint64_t>(i)});
    out[static_cast<size_t>(i)] = world::gen_motion(prompts[static_cast<size_t>(i)].spec, r);
  });
  return out;
}

metrics::MetricsReport evaluate_model(const ModelHandle& handle,
                                      const std::vector<world::PromptInstance>& prompts,
                                      const std::vector<world::MotionSequence>& reference,
                                      const reward::DualEncoder& evaluator,
                                      const diff::NoiseSchedule& schedule, const EvalConfig& cfg,
                                      uint64_t seed) {
  const int n = static_cast<int>(prompts.size());
  if (n < 2) throw std::runtime_error("evaluate_model: need at least two prompts");
  if (reference.size() != prompts.size()) {
    throw std::runtime_error("evaluate_model: reference/prompt size mismatch");
  }
  const int e = evaluator.config().emb;
  Rng root(seed);

  Tensor gen_feats({n, e}), text_feats({n, e}), ref_feats({n, e});
  std::vector<double> rewards(static_cast<size_t>(n), 0.0);
  nk::parallel_for(n, [&](int64_t i) {
    const world::PromptInstance& p = prompts[static_cast<size_t>(i)];
    const Tensor x0 = generate_one(handle, p.tokens, schedule, cfg,
                                   root.stream({0x67656e31ULL, static_cast<uint64_t>(i)}));
    const std::vector<double> gf = evaluator.encode_motion_flat(x0);
    const std::vector<double> tf = evaluator.encode_text(p.tokens);
    const std::vector<double> rf = evaluator.encode_motion(reference[static_cast<size_t>(i)]);
    for (int j = 0; j < e; ++j) {
      gen_feats.at2(i, j) = gf[static_cast<size_t>(j)];
      text_feats.at2(i, j) = tf[static_cast<size_t>(j)];
      ref_feats.at2(i, j) = rf[static_cast<size_t>(j)];
    }
    rewards[static_cast<size_t>(i)] =
        std::clamp(nk::serial::dot(gf.data(), tf.data(), e), -1.0, 1.0);
  });

  metrics::MetricsReport rep;
  rep.n_samples = n;
  rep.seed = seed;
  for (double r : rewards) rep.eval_reward += r;
  rep.eval_reward /= n;

  rep.fid = metrics::frechet(gen_feats, ref_feats);
  const int pool = std::min(cfg.pool, n);
  Rng rp = root.stream({0x72707631ULL});
  rep.r_at_1 = metrics::r_precision(gen_feats, text_feats, pool, 1, cfg.r_shuffles, rp);
  rep.r_at_2 = metrics::r_precision(gen_feats, text_feats, pool, 2, cfg.r_shuffles, rp);
  rep.r_at_3 = metrics::r_precision(gen_feats, text_feats, pool, 3, cfg.r_shuffles, rp);
  rep.mm_dist = metrics::mm_dist(gen_feats, text_feats);
  Rng dv = root.stream({0x64697631ULL});
  rep.diversity = metrics::diversity(gen_feats, cfg.diversity_pairs, dv);
  Rng dv2 = root.stream({0x64697631ULL});
  rep.diversity_gt = metrics::diversity(ref_feats, cfg.diversity_pairs, dv2);

  const int mm_prompts = std::min(cfg.mmodality_prompts, n);
  if (mm_prompts > 0 && cfg.mmodality_repeats > 1) {
    // Pre-generate in parallel, slot-addressed so the result is thread-count
    // independent.
    std::vector<std::vector<double>> feats(
        static_cast<size_t>(mm_prompts) * static_cast<size_t>(cfg.mmodality_repeats));
    nk::parallel_for(static_cast<int64_t>(feats.size()), [&](int64_t idx) {
      const int p = static_cast<int>(idx) / cfg.mmodality_repeats;
      const int r = static_cast<int>(idx) % cfg.mmodality_repeats;
      const Tensor x0 = generate_one(
          handle, prompts[static_cast<size_t>(p)].tokens, schedule, cfg,
          root.stream({0x6d6d6f64ULL, static_cast<uint64_t>(p), static_cast<uint64_t>(r)}));
      feats[static_cast<size_t>(idx)] = evaluator.encode_motion_flat(x0);
    });
    rep.mmodality = metrics::multimodality(
        [&](int p, int r) { return feats[static_cast<size_t>(p * cfg.mmodality_repeats + r)]; },
        mm_prompts, cfg.mmodality_repeats);
  }
  return rep;
}

const char* protocol_label(ProtocolName p) {
  switch (p) {
    case ProtocolName::kCrossDomain: return "cross-domain";
    case ProtocolName::kLeaveOneOut: return "leave-one-out";
    case ProtocolName::kForgetting: return "forgetting";
  }
  return "?";
}

ProtocolName parse_protocol_name(const std::string& s) {
  if (s == "cross-domain") return ProtocolName::kCrossDomain;
  if (s == "leave-one-out") return ProtocolName::kLeaveOneOut;
  if (s == "forgetting") return ProtocolName::kForgetting;
  throw std::runtime_error("unknown protocol: '" + s + "'");
}

ProtocolReports run_protocol(ProtocolName name, const ModelHandle& pre, const ModelHandle& post,
                             const world::SplitBundle& splits,
                             const reward::DualEncoder& evaluator,
                             const diff::NoiseSchedule& schedule, const EvalConfig& cfg,
                             uint64_t seed) {
  std::vector<world::PromptInstance> prompts;
  std::vector<world::MotionSequence> reference;
  if (name == ProtocolName::kForgetting) {
    for (const auto& rec : splits.pretrain_eval.records) {
      prompts.push_back(rec.prompt);
      reference.push_back(rec.motion);
    }
  } else {
    prompts = splits.adapt_eval.prompts;
    reference = reference_motions(prompts, hash_combine(seed, 0x67747265ULL));
  }
  if (prompts.empty()) throw std::runtime_error("run_protocol: empty evaluation split");
  ProtocolReports reports;
  reports.pre = evaluate_model(pre, prompts, reference, evaluator, schedule, cfg, seed);
  reports.post = evaluate_model(post, prompts, reference, evaluator, schedule, cfg, seed);
  return reports;
}

}  // namespace dmrl::protocol
