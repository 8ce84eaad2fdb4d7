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

#include "dmrl/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "dmrl/kernels.hpp"

namespace dmrl::diff {

std::vector<double> time_embedding(double t, int dim) {
  const int half = dim / 2;
  std::vector<double> e(static_cast<size_t>(dim), 0.0);
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / (half - 1));
    e[static_cast<size_t>(i)] = std::sin(t * freq);
    e[static_cast<size_t>(half + i)] = std::cos(t * freq);
  }
  return e;
}

Denoiser::Denoiser(DenoiserConfig cfg) : cfg_(cfg) {
  if (cfg_.vocab == 0) cfg_.vocab = world::Vocab::instance().size();
  stem_ = nn::Linear("den.stem", cfg_.motion_dim, cfg_.hidden);
  cond_ = nn::Linear("den.cond", cfg_.cond_dim(), cfg_.hidden);
  head_ = nn::Linear("den.head", cfg_.hidden, cfg_.motion_dim);
  for (int b = 0; b < cfg_.blocks; ++b) {
    trunk_.stages.push_back(
        nn::Stage::residual("den.block" + std::to_string(b), cfg_.hidden, cfg_.hidden));
  }
}

void Denoiser::init_params(ParamStore& ps, Rng& rng) const {
  Tensor& emb = ps.add("den.tok_emb", {cfg_.vocab, cfg_.token_emb});
  for (double& x : emb.data) x = 0.02 * rng.gaussian();
  stem_.init(ps, rng);
  cond_.init(ps, rng);
  trunk_.init(ps, rng);
  head_.init(ps, rng, /*zero_init=*/true);
  ps.add("den.gate.W", {cfg_.time_emb});
}

std::vector<std::string> Denoiser::lora_targets() const {
  std::vector<std::string> t;
  t.push_back(cond_.w_name);
  for (const auto& st : trunk_.stages) {
    t.push_back(st.fc1.w_name);
    t.push_back(st.fc2.w_name);
  }
  return t;
}

LoraSet Denoiser::make_lora(const ParamStore& ps, int rank, double alpha, Rng& rng) const {
  LoraSet set;
  for (const std::string& name : lora_targets()) {
    const Tensor& w = ps.get(name);
    set.adapters.push_back(LoraAdapter::init(name, w.rows(), w.cols(), rank, alpha, rng));
  }
  return set;
}

bool Denoiser::is_lora_param(const std::string& name) const {
  return name.size() > 7 && (name.rfind(".lora_A") == name.size() - 7 ||
                             name.rfind(".lora_B") == name.size() - 7);
}

Tensor Denoiser::forward(const ParamStore& ps, const LoraSet* lora, const Tensor& x_t, double t,
                         const world::PromptTokens& tokens, Cache* cache) const {
  if (x_t.numel() != cfg_.motion_dim) throw std::runtime_error("Denoiser: bad input size");
  Cache local;
  Cache& c = cache != nullptr ? *cache : local;
  c.x.assign(x_t.ptr(), x_t.ptr() + cfg_.motion_dim);
  c.tokens = tokens;

  const Tensor& emb = ps.get("den.tok_emb");
  c.pool.resize(static_cast<size_t>(cfg_.token_emb));
  nn::embed_mean_pool(emb, tokens.ids.data(), world::kPromptLen, c.pool.data());
  c.temb = time_embedding(t, cfg_.time_emb);
  c.cond_in = c.pool;
  c.cond_in.insert(c.cond_in.end(), c.temb.begin(), c.temb.end());

  c.pre.resize(static_cast<size_t>(cfg_.hidden));
  stem_.forward(ps, nullptr, c.x.data(), c.pre.data(), nullptr);
  std::vector<double> cv(static_cast<size_t>(cfg_.hidden));
  const LoraAdapter* cad = lora != nullptr ? lora->find(cond_.w_name) : nullptr;
  if (cad != nullptr) c.cond_ax.resize(static_cast<size_t>(cad->rank));
  cond_.forward(ps, cad, c.cond_in.data(), cv.data(), cad ? c.cond_ax.data() : nullptr);
  for (int i = 0; i < cfg_.hidden; ++i) c.pre[static_cast<size_t>(i)] += cv[static_cast<size_t>(i)];

  c.h0.resize(static_cast<size_t>(cfg_.hidden));
  for (int i = 0; i < cfg_.hidden; ++i) c.h0[static_cast<size_t>(i)] = nn::silu(c.pre[static_cast<size_t>(i)]);

  const std::vector<double> h = trunk_.forward(ps, lora, c.h0.data(), &c.trunk);

  Tensor eps({cfg_.motion_dim});
  head_.forward(ps, nullptr, h.data(), eps.ptr(), nullptr);
  const Tensor& gate = ps.get("den.gate.W");
  c.gate = nk::serial::dot(gate.ptr(), c.temb.data(), cfg_.time_emb);
  for (int i = 0; i < cfg_.motion_dim; ++i) eps[i] += c.gate * c.x[static_cast<size_t>(i)];
  eps.require_finite("denoiser output");
  return eps;
}

void Denoiser::backward(const ParamStore& ps, const LoraSet* lora, const Cache& cache,
                        const Tensor& grad_eps, nn::TrainMode mode, GradStore& gs,
                        double* grad_input) const {
  std::vector<double> gh(static_cast<size_t>(cfg_.hidden), 0.0);
  head_.backward(ps, nullptr, cache.trunk.out.data(), nullptr, grad_eps.ptr(), mode, gs, gh.data());

  const std::vector<double> gh0 =
      trunk_.backward(ps, lora, cache.trunk, gh.data(), mode, gs);

  std::vector<double> gpre(static_cast<size_t>(cfg_.hidden));
  for (int i = 0; i < cfg_.hidden; ++i) {
    gpre[static_cast<size_t>(i)] = gh0[static_cast<size_t>(i)] * nn::silu_grad(cache.pre[static_cast<size_t>(i)]);
  }

  const LoraAdapter* cad = lora != nullptr ? lora->find(cond_.w_name) : nullptr;
  std::vector<double> gcond(static_cast<size_t>(cfg_.cond_dim()), 0.0);
  cond_.backward(ps, cad, cache.cond_in.data(), cad ? cache.cond_ax.data() : nullptr, gpre.data(),
                 mode, gs, gcond.data());
  if (grad_input != nullptr) {
    for (int i = 0; i < cfg_.motion_dim; ++i) {
      grad_input[i] = cache.gate * grad_eps[i];  // direct path
    }
  }
  stem_.backward(ps, nullptr, cache.x.data(), nullptr, gpre.data(), mode, gs, grad_input);

  if (mode == nn::TrainMode::kFull) {
    const Tensor& emb = ps.get("den.tok_emb");
    nn::embed_mean_pool_backward("den.tok_emb", emb, cache.tokens.ids.data(), world::kPromptLen,
                                 gcond.data(), gs);
    double g_gate = 0.0;
    for (int i = 0; i < cfg_.motion_dim; ++i) g_gate += grad_eps[i] * cache.x[static_cast<size_t>(i)];
    Tensor& dg = gs.lazy("den.gate.W", {cfg_.time_emb});
    for (int i = 0; i < cfg_.time_emb; ++i) dg[i] += g_gate * cache.temb[static_cast<size_t>(i)];
  }
}

}  // namespace dmrl::diff
