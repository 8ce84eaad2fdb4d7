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

#include "dmrl/mlp.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "dmrl/kernels.hpp"

namespace dmrl::nn {

void Linear::init(ParamStore& ps, Rng& rng, bool zero_init) const {
  Tensor& w = ps.add(w_name, {out, in});
  ps.add(b_name, {out});
  if (!zero_init) {
    const double std = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& x : w.data) x = std * rng.gaussian();
  }
}

void Linear::forward(const ParamStore& ps, const LoraAdapter* ad, const double* x, double* y,
                     double* ax_cache) const {
  const Tensor& w = ps.get(w_name);
  const Tensor& b = ps.get(b_name);
  if (w.rows() != out || w.cols() != in) {
    throw std::runtime_error("Linear: shape mismatch for " + w_name);
  }
  std::memcpy(y, b.ptr(), sizeof(double) * out);
  nk::serial::matvec_add(w.ptr(), out, in, x, y);
  if (ad != nullptr) {
    if (ad->d_in() != in || ad->d_out() != out) {
      throw std::runtime_error("Linear: adapter shape mismatch for " + w_name);
    }
    if (ax_cache == nullptr) throw std::runtime_error("Linear: adapter needs ax cache");
    nk::serial::matvec(ad->A.ptr(), ad->rank, in, x, ax_cache);
    const double s = ad->scale();
    for (int r = 0; r < out; ++r) {
      y[r] += s * nk::serial::dot(ad->B.ptr() + static_cast<int64_t>(r) * ad->rank, ax_cache,
                                  ad->rank);
    }
  }
}

void Linear::backward(const ParamStore& ps, const LoraAdapter* ad, const double* x,
                      const double* ax_cache, const double* gy, TrainMode mode, GradStore& gs,
                      double* gx_add) const {
  const Tensor& w = ps.get(w_name);
  if (mode == TrainMode::kFull) {
    Tensor& dw = gs.lazy(w_name, {out, in});
    nk::serial::outer_add(gy, out, x, in, dw.ptr());
    Tensor& db = gs.lazy(b_name, {out});
    for (int r = 0; r < out; ++r) db[r] += gy[r];
  }
  if (ad != nullptr) {
    const double s = ad->scale();
    // gB = s * gy (A x)^T, gA = s * (B^T gy) x^T
    Tensor& dB = gs.lazy(ad->b_name(), {out, ad->rank});
    std::vector<double> sgy(out);
    for (int r = 0; r < out; ++r) sgy[r] = s * gy[r];
    nk::serial::outer_add(sgy.data(), out, ax_cache, ad->rank, dB.ptr());
    std::vector<double> btg(ad->rank, 0.0);
    nk::serial::matvec_t_add(ad->B.ptr(), out, ad->rank, sgy.data(), btg.data());
    Tensor& dA = gs.lazy(ad->a_name(), {ad->rank, in});
    nk::serial::outer_add(btg.data(), ad->rank, x, in, dA.ptr());
    if (gx_add != nullptr) nk::serial::matvec_t_add(ad->A.ptr(), ad->rank, in, btg.data(), gx_add);
  }
  if (gx_add != nullptr) nk::serial::matvec_t_add(w.ptr(), out, in, gy, gx_add);
}

void Mlp::init(ParamStore& ps, Rng& rng, bool zero_last) const {
  for (size_t i = 0; i < stages.size(); ++i) {
    const Stage& st = stages[i];
    const bool last = i + 1 == stages.size();
    if (st.kind == Stage::kPlain) {
      st.lin.init(ps, rng, zero_last && last);
    } else {
      st.fc1.init(ps, rng, false);
      st.fc2.init(ps, rng, zero_last && last);
    }
  }
}

std::vector<double> Mlp::forward(const ParamStore& ps, const LoraSet* lora, const double* x,
                                 MlpCache* cache) const {
  std::vector<double> cur(x, x + in_dim());
  if (cache != nullptr) cache->stages.assign(stages.size(), StageCache());
  for (size_t i = 0; i < stages.size(); ++i) {
    const Stage& st = stages[i];
    StageCache local;
    StageCache& sc = cache != nullptr ? cache->stages[i] : local;
    sc.x_in = cur;
    if (st.kind == Stage::kPlain) {
      const LoraAdapter* ad = lora != nullptr ? lora->find(st.lin.w_name) : nullptr;
      sc.u.resize(st.lin.out);
      if (ad != nullptr) sc.ax1.resize(ad->rank);
      st.lin.forward(ps, ad, sc.x_in.data(), sc.u.data(), ad ? sc.ax1.data() : nullptr);
      cur.resize(st.lin.out);
      if (st.act) {
        for (int r = 0; r < st.lin.out; ++r) cur[r] = silu(sc.u[r]);
      } else {
        cur = sc.u;
      }
    } else {
      const LoraAdapter* ad1 = lora != nullptr ? lora->find(st.fc1.w_name) : nullptr;
      const LoraAdapter* ad2 = lora != nullptr ? lora->find(st.fc2.w_name) : nullptr;
      sc.u.resize(st.fc1.out);
      if (ad1 != nullptr) sc.ax1.resize(ad1->rank);
      st.fc1.forward(ps, ad1, sc.x_in.data(), sc.u.data(), ad1 ? sc.ax1.data() : nullptr);
      sc.s.resize(st.fc1.out);
      for (int r = 0; r < st.fc1.out; ++r) sc.s[r] = silu(sc.u[r]);
      std::vector<double> v(st.fc2.out);
      if (ad2 != nullptr) sc.ax2.resize(ad2->rank);
      st.fc2.forward(ps, ad2, sc.s.data(), v.data(), ad2 ? sc.ax2.data() : nullptr);
      for (int r = 0; r < st.fc2.out; ++r) cur[r] = sc.x_in[r] + v[r];
    }
  }
  if (cache != nullptr) cache->out = cur;
  return cur;
}

std::vector<double> Mlp::backward(const ParamStore& ps, const LoraSet* lora, const MlpCache& cache,
                                  const double* grad_out, TrainMode mode, GradStore& gs) const {
  std::vector<double> g(grad_out, grad_out + out_dim());
  for (size_t ri = stages.size(); ri-- > 0;) {
    const Stage& st = stages[ri];
    const StageCache& sc = cache.stages[ri];
    if (st.kind == Stage::kPlain) {
      const LoraAdapter* ad = lora != nullptr ? lora->find(st.lin.w_name) : nullptr;
      std::vector<double> gu(st.lin.out);
      if (st.act) {
        for (int r = 0; r < st.lin.out; ++r) gu[r] = g[r] * silu_grad(sc.u[r]);
      } else {
        gu.assign(g.begin(), g.end());
      }
      std::vector<double> gx(st.lin.in, 0.0);
      st.lin.backward(ps, ad, sc.x_in.data(), ad ? sc.ax1.data() : nullptr, gu.data(), mode, gs,
                      gx.data());
      g = std::move(gx);
    } else {
      const LoraAdapter* ad1 = lora != nullptr ? lora->find(st.fc1.w_name) : nullptr;
      const LoraAdapter* ad2 = lora != nullptr ? lora->find(st.fc2.w_name) : nullptr;
      // out = x + fc2(silu(fc1 x)); g flows through both paths.
      std::vector<double> gs2(st.fc2.in, 0.0);
      st.fc2.backward(ps, ad2, sc.s.data(), ad2 ? sc.ax2.data() : nullptr, g.data(), mode, gs,
                      gs2.data());
      std::vector<double> gu(st.fc1.out);
      for (int r = 0; r < st.fc1.out; ++r) gu[r] = gs2[r] * silu_grad(sc.u[r]);
      std::vector<double> gx(st.fc1.in, 0.0);
      st.fc1.backward(ps, ad1, sc.x_in.data(), ad1 ? sc.ax1.data() : nullptr, gu.data(), mode, gs,
                      gx.data());
      for (int r = 0; r < st.fc1.in; ++r) g[r] += gx[r];
    }
  }
  return g;
}

std::vector<std::string> Mlp::weight_names() const {
  std::vector<std::string> names;
  for (const Stage& st : stages) {
    if (st.kind == Stage::kPlain) {
      names.push_back(st.lin.w_name);
    } else {
      names.push_back(st.fc1.w_name);
      names.push_back(st.fc2.w_name);
    }
  }
  return names;
}

void embed_mean_pool(const Tensor& table, const int32_t* ids, int count, double* out) {
  const int64_t dim = table.cols();
  for (int64_t d = 0; d < dim; ++d) out[d] = 0.0;
  for (int i = 0; i < count; ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) throw std::runtime_error("embed: id out of range");
    const double* row = table.ptr() + static_cast<int64_t>(ids[i]) * dim;
    for (int64_t d = 0; d < dim; ++d) out[d] += row[d];
  }
  const double inv = 1.0 / count;
  for (int64_t d = 0; d < dim; ++d) out[d] *= inv;
}

void embed_mean_pool_backward(const std::string& table_name, const Tensor& table,
                              const int32_t* ids, int count, const double* gpool, GradStore& gs) {
  const int64_t dim = table.cols();
  Tensor& dt = gs.lazy(table_name, table.shape);
  const double inv = 1.0 / count;
  for (int i = 0; i < count; ++i) {
    double* row = dt.ptr() + static_cast<int64_t>(ids[i]) * dim;
    for (int64_t d = 0; d < dim; ++d) row[d] += inv * gpool[d];
  }
}

double l2_normalize(const double* z, int n, double* y) {
  double nrm = std::sqrt(nk::serial::dot(z, z, n));
  const double safe = nrm > 1e-30 ? nrm : 1e-30;
  for (int i = 0; i < n; ++i) y[i] = z[i] / safe;
  return nrm;
}

void l2_normalize_backward(const double* z, int n, const double* gy, double* gz) {
  double nrm = std::sqrt(nk::serial::dot(z, z, n));
  const double safe = nrm > 1e-30 ? nrm : 1e-30;
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) y[i] = z[i] / safe;
  const double proj = nk::serial::dot(y.data(), gy, n);
  for (int i = 0; i < n; ++i) gz[i] = (gy[i] - y[i] * proj) / safe;
}

}  // namespace dmrl::nn
