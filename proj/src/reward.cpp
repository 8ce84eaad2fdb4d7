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

#include "dmrl/reward.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "dmrl/adam.hpp"
#include "dmrl/kernels.hpp"

namespace dmrl::reward {

namespace {
nn::Mlp build_mlp(const std::string& prefix, int in, const std::vector<int>& hidden, int out) {
  nn::Mlp mlp;
  int cur = in;
  for (size_t i = 0; i < hidden.size(); ++i) {
    mlp.stages.push_back(nn::Stage::plain(prefix + ".l" + std::to_string(i), cur, hidden[i], true));
    cur = hidden[i];
  }
  mlp.stages.push_back(nn::Stage::plain(prefix + ".out", cur, out, false));
  return mlp;
}
}  // namespace

DualEncoder::DualEncoder(EncoderConfig cfg, uint64_t init_seed) : cfg_(cfg) {
  if (cfg_.vocab == 0) cfg_.vocab = world::Vocab::instance().size();
  motion_mlp_ = build_mlp("enc.motion", world::kMotionDim, cfg_.motion_hidden, cfg_.emb);
  text_mlp_ = build_mlp("enc.text", cfg_.token_emb, cfg_.text_hidden, cfg_.emb);
  Rng rng(init_seed);
  params_.rng_seed = init_seed;
  Tensor& emb = params_.add("enc.tok_emb", {cfg_.vocab, cfg_.token_emb});
  for (double& x : emb.data) x = 0.02 * rng.gaussian();
  motion_mlp_.init(params_, rng);
  text_mlp_.init(params_, rng);
  Tensor& lt = params_.add("enc.log_tau", {1});
  lt[0] = std::log(cfg_.tau_init);
}

double DualEncoder::tau() const { return std::exp(params_.get("enc.log_tau")[0]); }

void DualEncoder::load_params(ParamStore&& ps) {
  if (ps.entries.size() != params_.entries.size()) {
    throw std::runtime_error("DualEncoder: checkpoint parameter set does not match");
  }
  for (const auto& [name, t] : params_.entries) {
    if (!ps.has(name) || !ps.get(name).same_shape(t)) {
      throw std::runtime_error("DualEncoder: checkpoint mismatch for " + name);
    }
  }
  params_ = std::move(ps);
}

std::vector<double> DualEncoder::encode_motion_cached(const Tensor& flat,
                                                      MotionCache& cache) const {
  if (flat.numel() != world::kMotionDim) throw std::runtime_error("encode_motion: bad input size");
  cache.pre_norm = motion_mlp_.forward(params_, nullptr, flat.ptr(), &cache.mlp);
  std::vector<double> out(static_cast<size_t>(cfg_.emb));
  nn::l2_normalize(cache.pre_norm.data(), cfg_.emb, out.data());
  for (double v : out) {
    if (!std::isfinite(v)) throw std::runtime_error("encode_motion: non-finite embedding");
  }
  return out;
}

std::vector<double> DualEncoder::encode_text_cached(const world::PromptTokens& tokens,
                                                    TextCache& cache) const {
  cache.tokens = tokens;
  const Tensor& emb = params_.get("enc.tok_emb");
  cache.pool.resize(static_cast<size_t>(cfg_.token_emb));
  nn::embed_mean_pool(emb, tokens.ids.data(), world::kPromptLen, cache.pool.data());
  cache.pre_norm = text_mlp_.forward(params_, nullptr, cache.pool.data(), &cache.mlp);
  std::vector<double> out(static_cast<size_t>(cfg_.emb));
  nn::l2_normalize(cache.pre_norm.data(), cfg_.emb, out.data());
  for (double v : out) {
    if (!std::isfinite(v)) throw std::runtime_error("encode_text: non-finite embedding");
  }
  return out;
}

std::vector<double> DualEncoder::encode_motion(const world::MotionSequence& m) const {
  MotionCache cache;
  return encode_motion_cached(m.frames, cache);
}

std::vector<double> DualEncoder::encode_motion_flat(const Tensor& flat) const {
  MotionCache cache;
  return encode_motion_cached(flat, cache);
}

std::vector<double> DualEncoder::encode_text(const world::PromptTokens& tokens) const {
  TextCache cache;
  return encode_text_cached(tokens, cache);
}

void DualEncoder::backward_motion(const MotionCache& cache, const double* g_emb,
                                  GradStore& gs) const {
  std::vector<double> gz(static_cast<size_t>(cfg_.emb));
  nn::l2_normalize_backward(cache.pre_norm.data(), cfg_.emb, g_emb, gz.data());
  motion_mlp_.backward(params_, nullptr, cache.mlp, gz.data(), nn::TrainMode::kFull, gs);
}

void DualEncoder::backward_text(const TextCache& cache, const double* g_emb, GradStore& gs) const {
  std::vector<double> gz(static_cast<size_t>(cfg_.emb));
  nn::l2_normalize_backward(cache.pre_norm.data(), cfg_.emb, g_emb, gz.data());
  const std::vector<double> gpool =
      text_mlp_.backward(params_, nullptr, cache.mlp, gz.data(), nn::TrainMode::kFull, gs);
  const Tensor& emb = params_.get("enc.tok_emb");
  nn::embed_mean_pool_backward("enc.tok_emb", emb, cache.tokens.ids.data(), world::kPromptLen,
                               gpool.data(), gs);
}

DualEncoder::TrainStats DualEncoder::train_contrastive(
    const world::MotionSplit& data, int batch, int iters, double lr, Rng& rng,
    const std::function<void(int, double)>& on_log) {
  if (frozen_) throw std::runtime_error("train_contrastive: encoder is frozen");
  if (data.records.empty()) throw std::runtime_error("train_contrastive: no motion access");

  // Index records by distinct spec so a batch never holds duplicate texts.
  std::map<std::string, std::vector<int>> by_spec;
  for (size_t i = 0; i < data.records.size(); ++i) {
    by_spec[data.records[i].prompt.tokens.text].push_back(static_cast<int>(i));
  }
  std::vector<const std::vector<int>*> spec_pools;
  for (const auto& [text, pool] : by_spec) spec_pools.push_back(&pool);
  const int n_specs = static_cast<int>(spec_pools.size());
  const int eff_batch = std::min(batch, n_specs);

  AdamConfig adam{lr, 0.9, 0.999, 1e-8};
  AdamState state;
  const ParamRefs refs = refs_of(params_);

  TrainStats stats;
  for (int iter = 0; iter < iters; ++iter) {
    Rng it_rng = rng.stream({0x636f6eULL, static_cast<uint64_t>(iter)});
    // Sample eff_batch distinct specs, one random instance each.
    std::vector<int> spec_ids(static_cast<size_t>(n_specs));
    for (int i = 0; i < n_specs; ++i) spec_ids[static_cast<size_t>(i)] = i;
    for (int i = 0; i < eff_batch; ++i) {
      const int j = it_rng.uniform_int(i, n_specs - 1);
      std::swap(spec_ids[static_cast<size_t>(i)], spec_ids[static_cast<size_t>(j)]);
    }
    std::vector<int> recs(static_cast<size_t>(eff_batch));
    for (int i = 0; i < eff_batch; ++i) {
      const std::vector<int>& pool = *spec_pools[static_cast<size_t>(spec_ids[static_cast<size_t>(i)])];
      recs[static_cast<size_t>(i)] = pool[static_cast<size_t>(it_rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
    }

    const int b = eff_batch;
    std::vector<MotionCache> mcache(static_cast<size_t>(b));
    std::vector<TextCache> tcache(static_cast<size_t>(b));
    std::vector<std::vector<double>> me(static_cast<size_t>(b)), te(static_cast<size_t>(b));
    nk::parallel_for(b, [&](int64_t i) {
      const world::MotionRecord& rec = data.records[static_cast<size_t>(recs[static_cast<size_t>(i)])];
      me[static_cast<size_t>(i)] = encode_motion_cached(rec.motion.frames, mcache[static_cast<size_t>(i)]);
      te[static_cast<size_t>(i)] = encode_text_cached(rec.prompt.tokens, tcache[static_cast<size_t>(i)]);
    });

    // logits[i][j] = <t_i, m_j> / tau
    const double tau_v = tau();
    std::vector<double> logits(static_cast<size_t>(b) * b);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < b; ++j) {
        logits[static_cast<size_t>(i * b + j)] =
            nk::serial::dot(te[static_cast<size_t>(i)].data(), me[static_cast<size_t>(j)].data(), cfg_.emb) / tau_v;
      }
    }
    std::vector<double> g;
    const double loss = symmetric_infonce(logits, b, &g);
    if (!std::isfinite(loss)) throw std::runtime_error("train_contrastive: loss diverged");

    std::vector<GradStore> grads(static_cast<size_t>(b));
    double g_log_tau = 0.0;
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < b; ++j) {
        g_log_tau -= g[static_cast<size_t>(i * b + j)] * logits[static_cast<size_t>(i * b + j)];
      }
    }
    nk::parallel_for(b, [&](int64_t idx) {
      const int i = static_cast<int>(idx);
      std::vector<double> gt(static_cast<size_t>(cfg_.emb), 0.0);
      std::vector<double> gm(static_cast<size_t>(cfg_.emb), 0.0);
      for (int j = 0; j < b; ++j) {
        const double gij = g[static_cast<size_t>(i * b + j)] / tau_v;   // d/d t_i
        const double gji = g[static_cast<size_t>(j * b + i)] / tau_v;   // d/d m_i
        for (int e = 0; e < cfg_.emb; ++e) {
          gt[static_cast<size_t>(e)] += gij * me[static_cast<size_t>(j)][static_cast<size_t>(e)];
          gm[static_cast<size_t>(e)] += gji * te[static_cast<size_t>(j)][static_cast<size_t>(e)];
        }
      }
      backward_text(tcache[static_cast<size_t>(i)], gt.data(), grads[static_cast<size_t>(i)]);
      backward_motion(mcache[static_cast<size_t>(i)], gm.data(), grads[static_cast<size_t>(i)]);
    });
    GradStore total;
    for (int i = 0; i < b; ++i) total.add_scaled(grads[static_cast<size_t>(i)], 1.0);
    total.lazy("enc.log_tau", {1})[0] += g_log_tau;
    adam_step(refs, total, state, adam);

    stats.final_loss = loss;
    stats.iters = iter + 1;
    if (on_log && (iter % 100 == 0 || iter + 1 == iters)) on_log(iter, loss);
  }
  return stats;
}

double symmetric_infonce(const std::vector<double>& logits, int b, std::vector<double>* grad) {
  if (static_cast<int>(logits.size()) != b * b) {
    throw std::runtime_error("symmetric_infonce: logits must be b x b");
  }
  auto softmax_nll = [&](const std::vector<double>& row, int target, std::vector<double>& probs) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double z = 0.0;
    probs.resize(row.size());
    for (size_t j = 0; j < row.size(); ++j) {
      probs[j] = std::exp(row[j] - mx);
      z += probs[j];
    }
    for (double& p : probs) p /= z;
    return -std::log(std::max(probs[static_cast<size_t>(target)], 1e-300));
  };

  double loss = 0.0;
  if (grad != nullptr) grad->assign(static_cast<size_t>(b) * b, 0.0);
  std::vector<double> row(static_cast<size_t>(b)), probs;
  const double w = 0.5 / b;
  for (int i = 0; i < b; ++i) {  // text -> motion
    for (int j = 0; j < b; ++j) row[static_cast<size_t>(j)] = logits[static_cast<size_t>(i * b + j)];
    loss += w * softmax_nll(row, i, probs);
    if (grad != nullptr) {
      for (int j = 0; j < b; ++j) {
        (*grad)[static_cast<size_t>(i * b + j)] += w * (probs[static_cast<size_t>(j)] - (i == j ? 1.0 : 0.0));
      }
    }
  }
  for (int j = 0; j < b; ++j) {  // motion -> text
    for (int i = 0; i < b; ++i) row[static_cast<size_t>(i)] = logits[static_cast<size_t>(i * b + j)];
    loss += w * softmax_nll(row, j, probs);
    if (grad != nullptr) {
      for (int i = 0; i < b; ++i) {
        (*grad)[static_cast<size_t>(i * b + j)] += w * (probs[static_cast<size_t>(i)] - (i == j ? 1.0 : 0.0));
      }
    }
  }
  return loss;
}

double score(const DualEncoder& enc, const world::MotionSequence& x0,
             const world::PromptTokens& tokens) {
  return score_flat(enc, x0.frames, tokens);
}

double score_flat(const DualEncoder& enc, const Tensor& x0_flat,
                  const world::PromptTokens& tokens) {
  const std::vector<double> m = enc.encode_motion_flat(x0_flat);
  const std::vector<double> t = enc.encode_text(tokens);
  const double r = nk::serial::dot(m.data(), t.data(), enc.config().emb);
  return std::clamp(r, -1.0, 1.0);
}

double retrieval_r1(const DualEncoder& enc, int pool, int repeats, Rng& rng) {
  const std::vector<world::PromptSpec> specs = world::all_specs();
  int hits = 0, total = 0;
  for (int rep = 0; rep < repeats; ++rep) {
    Rng r = rng.stream({0x72317265ULL, static_cast<uint64_t>(rep)});
    std::vector<int> ids(specs.size());
    for (size_t i = 0; i < specs.size(); ++i) ids[i] = static_cast<int>(i);
    for (int i = 0; i < pool; ++i) {
      const int j = r.uniform_int(i, static_cast<int>(specs.size()) - 1);
      std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
    }
    std::vector<std::vector<double>> me(static_cast<size_t>(pool)), te(static_cast<size_t>(pool));
    for (int i = 0; i < pool; ++i) {
      const world::PromptSpec& spec = specs[static_cast<size_t>(ids[static_cast<size_t>(i)])];
      Rng gr = r.stream({static_cast<uint64_t>(i)});
      const world::MotionSequence mo = world::gen_motion(spec, gr);
      me[static_cast<size_t>(i)] = enc.encode_motion(mo);
      te[static_cast<size_t>(i)] = enc.encode_text(world::tokenize(world::render_prompt(spec)));
    }
    for (int i = 0; i < pool; ++i) {
      const double own = nk::serial::dot(me[static_cast<size_t>(i)].data(), te[static_cast<size_t>(i)].data(), enc.config().emb);
      int better = 0;
      for (int j = 0; j < pool; ++j) {
        if (j == i) continue;
        const double sim = nk::serial::dot(me[static_cast<size_t>(i)].data(), te[static_cast<size_t>(j)].data(), enc.config().emb);
        if (sim > own) ++better;
      }
      if (better == 0) ++hits;
      ++total;
    }
  }
  return static_cast<double>(hits) / total;
}

double reward_margin(const DualEncoder& enc, int n_samples, Rng& rng) {
  const std::vector<world::PromptSpec> specs = world::all_specs();
  double matched = 0.0, mismatched = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    Rng r = rng.stream({0x6d617267ULL, static_cast<uint64_t>(i)});
    const int a = r.uniform_int(0, static_cast<int>(specs.size()) - 1);
    int bidx = r.uniform_int(0, static_cast<int>(specs.size()) - 2);
    if (bidx >= a) ++bidx;
    const world::MotionSequence mo = world::gen_motion(specs[static_cast<size_t>(a)], r);
    matched += score(enc, mo, world::tokenize(world::render_prompt(specs[static_cast<size_t>(a)])));
    mismatched += score(enc, mo, world::tokenize(world::render_prompt(specs[static_cast<size_t>(bidx)])));
  }
  return (matched - mismatched) / n_samples;
}

}  // namespace dmrl::reward
