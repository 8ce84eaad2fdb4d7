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

#include "dmrl/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "dmrl/kernels.hpp"

namespace dmrl::metrics {

std::vector<double> eig_sym(const Tensor& m, Tensor* eigvecs) {
  const int n = static_cast<int>(m.rows());
  if (m.cols() != n) throw std::runtime_error("eig_sym: matrix not square");
  Tensor a = m;
  Tensor v = Tensor({n, n});
  for (int i = 0; i < n; ++i) v.at2(i, i) = 1.0;

  double frob = 0.0;
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) frob += a.at2(p, q) * a.at2(p, q);
  }
  const double tol = 1e-26 * std::max(frob, 1e-30);
  const int max_sweeps = 128;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += a.at2(p, q) * a.at2(p, q);
    }
    if (off < tol) break;
    if (sweep == max_sweeps - 1) throw std::runtime_error("eig_sym: no convergence");
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a.at2(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double app = a.at2(p, p), aqq = a.at2(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < n; ++i) {
          const double aip = a.at2(i, p), aiq = a.at2(i, q);
          a.at2(i, p) = c * aip - s * aiq;
          a.at2(i, q) = s * aip + c * aiq;
        }
        for (int i = 0; i < n; ++i) {
          const double api = a.at2(p, i), aqi = a.at2(q, i);
          a.at2(p, i) = c * api - s * aqi;
          a.at2(q, i) = s * api + c * aqi;
        }
        for (int i = 0; i < n; ++i) {
          const double vip = v.at2(i, p), viq = v.at2(i, q);
          v.at2(i, p) = c * vip - s * viq;
          v.at2(i, q) = s * vip + c * viq;
        }
      }
    }
  }
  std::vector<double> eig(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) eig[static_cast<size_t>(i)] = a.at2(i, i);
  if (eigvecs != nullptr) *eigvecs = std::move(v);
  return eig;
}

namespace {

void mean_and_cov(const Tensor& feats, std::vector<double>& mu, Tensor& cov) {
  const int n = static_cast<int>(feats.rows());
  const int e = static_cast<int>(feats.cols());
  mu.assign(static_cast<size_t>(e), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < e; ++j) mu[static_cast<size_t>(j)] += feats.at2(i, j);
  }
  for (double& x : mu) x /= n;
  cov = Tensor({e, e});
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < e; ++a) {
      const double da = feats.at2(i, a) - mu[static_cast<size_t>(a)];
      for (int b = a; b < e; ++b) {
        cov.at2(a, b) += da * (feats.at2(i, b) - mu[static_cast<size_t>(b)]);
      }
    }
  }
  for (int a = 0; a < e; ++a) {
    for (int b = a; b < e; ++b) {
      cov.at2(a, b) /= n;
      cov.at2(b, a) = cov.at2(a, b);
    }
  }
}

Tensor sym_sqrt(const Tensor& m) {
  Tensor vecs;
  std::vector<double> eig = eig_sym(m, &vecs);
  const int n = static_cast<int>(m.rows());
  double scale = 1.0;
  for (double l : eig) scale = std::max(scale, std::abs(l));
  for (double& l : eig) {
    if (l < 0.0) {
      if (l < -1e-8 * scale) throw std::runtime_error("sym_sqrt: negative eigenvalue");
      l = 0.0;
    }
    l = std::sqrt(l);
  }
  Tensor out({n, n});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += vecs.at2(i, k) * eig[static_cast<size_t>(k)] * vecs.at2(j, k);
      out.at2(i, j) = s;
    }
  }
  return out;
}

}  // namespace

double frechet(const Tensor& feats_a, const Tensor& feats_b, double shrink) {
  const int e = static_cast<int>(feats_a.cols());
  if (feats_b.cols() != e) throw std::runtime_error("frechet: dimension mismatch");
  if (feats_a.rows() < 2 || feats_b.rows() < 2) throw std::runtime_error("frechet: too few samples");
  std::vector<double> mu_a, mu_b;
  Tensor cov_a, cov_b;
  mean_and_cov(feats_a, mu_a, cov_a);
  mean_and_cov(feats_b, mu_b, cov_b);
  for (int i = 0; i < e; ++i) {
    cov_a.at2(i, i) += shrink;
    cov_b.at2(i, i) += shrink;
  }

  double mean_term = 0.0, tr_a = 0.0, tr_b = 0.0;
  for (int i = 0; i < e; ++i) {
    const double d = mu_a[static_cast<size_t>(i)] - mu_b[static_cast<size_t>(i)];
    mean_term += d * d;
    tr_a += cov_a.at2(i, i);
    tr_b += cov_b.at2(i, i);
  }

  const Tensor sqrt_a = sym_sqrt(cov_a);
  // M = Sa^1/2 Sb Sa^1/2 is symmetric PSD and shares eigenvalues with Sa Sb.
  Tensor tmp({e, e}), m({e, e});
  nk::matmul(sqrt_a.ptr(), e, e, cov_b.ptr(), e, tmp.ptr());
  nk::matmul(tmp.ptr(), e, e, sqrt_a.ptr(), e, m.ptr());
  for (int i = 0; i < e; ++i) {
    for (int j = i + 1; j < e; ++j) {
      const double s = 0.5 * (m.at2(i, j) + m.at2(j, i));
      m.at2(i, j) = s;
      m.at2(j, i) = s;
    }
  }
  std::vector<double> eig = eig_sym(m);
  double scale = 1.0;
  for (double l : eig) scale = std::max(scale, std::abs(l));
  double tr_sqrt = 0.0;
  for (double l : eig) {
    if (l < 0.0) {
      if (l < -1e-8 * scale) throw std::runtime_error("frechet: eigendecomposition failure");
      l = 0.0;  // rounding artifact, clamped
    }
    tr_sqrt += std::sqrt(l);
  }
  double fid = mean_term + tr_a + tr_b - 2.0 * tr_sqrt;
  if (fid < 0.0) {
    if (fid < -1e-8) throw std::runtime_error("frechet: negative distance");
    fid = 0.0;  // rounding artifact, clamped
  }
  return fid;
}

namespace {
double euclid(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}
}  // namespace

double r_precision(const Tensor& gen_feats, const Tensor& text_feats, int pool, int k,
                   int shuffles, Rng& rng) {
  const int n = static_cast<int>(gen_feats.rows());
  const int e = static_cast<int>(gen_feats.cols());
  if (text_feats.rows() != n || text_feats.cols() != e) {
    throw std::runtime_error("r_precision: feature sets must align");
  }
  if (pool < 2) throw std::runtime_error("r_precision: pool must be >= 2");
  if (pool > n) throw std::runtime_error("r_precision: pool larger than sample count");
  if (k < 1 || k > pool) throw std::runtime_error("r_precision: bad k");

  int64_t hits = 0, total = 0;
  for (int sh = 0; sh < shuffles; ++sh) {
    Rng shuffle_rng = rng.stream({0x72707265ULL, static_cast<uint64_t>(sh)});
    for (int i = 0; i < n; ++i) {
      const double own = euclid(gen_feats.ptr() + static_cast<int64_t>(i) * e,
                                text_feats.ptr() + static_cast<int64_t>(i) * e, e);
      int closer = 0;
      for (int d = 0; d < pool - 1; ++d) {
        int j = shuffle_rng.uniform_int(0, n - 2);
        if (j >= i) ++j;
        const double dist = euclid(gen_feats.ptr() + static_cast<int64_t>(i) * e,
                                   text_feats.ptr() + static_cast<int64_t>(j) * e, e);
        if (dist < own) ++closer;
      }
      if (closer + 1 <= k) ++hits;
      ++total;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

double mm_dist(const Tensor& gen_feats, const Tensor& text_feats) {
  const int n = static_cast<int>(gen_feats.rows());
  const int e = static_cast<int>(gen_feats.cols());
  if (text_feats.rows() != n || text_feats.cols() != e) {
    throw std::runtime_error("mm_dist: feature sets must align");
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    s += euclid(gen_feats.ptr() + static_cast<int64_t>(i) * e,
                text_feats.ptr() + static_cast<int64_t>(i) * e, e);
  }
  return s / n;
}

double diversity(const Tensor& feats, int n_pairs, Rng& rng) {
  const int n = static_cast<int>(feats.rows());
  const int e = static_cast<int>(feats.cols());
  if (n < 2) throw std::runtime_error("diversity: need at least two samples");
  double s = 0.0;
  for (int p = 0; p < n_pairs; ++p) {
    const int i = rng.uniform_int(0, n - 1);
    int j = rng.uniform_int(0, n - 2);
    if (j >= i) ++j;
    s += euclid(feats.ptr() + static_cast<int64_t>(i) * e,
                feats.ptr() + static_cast<int64_t>(j) * e, e);
  }
  return s / n_pairs;
}

double multimodality(const std::function<std::vector<double>(int, int)>& sample_feat,
                     int n_prompts, int repeats) {
  if (repeats < 2) throw std::runtime_error("multimodality: need repeats >= 2");
  double total = 0.0;
  for (int p = 0; p < n_prompts; ++p) {
    std::vector<std::vector<double>> feats(static_cast<size_t>(repeats));
    for (int r = 0; r < repeats; ++r) feats[static_cast<size_t>(r)] = sample_feat(p, r);
    const int e = static_cast<int>(feats[0].size());
    double s = 0.0;
    int cnt = 0;
    for (int a = 0; a < repeats; ++a) {
      for (int b = a + 1; b < repeats; ++b) {
        s += euclid(feats[static_cast<size_t>(a)].data(), feats[static_cast<size_t>(b)].data(), e);
        ++cnt;
      }
    }
    total += s / cnt;
  }
  return total / n_prompts;
}

std::string MetricsReport::to_json() const {
  nlohmann::json j;
  j["r_at_1"] = r_at_1;
  j["r_at_2"] = r_at_2;
  j["r_at_3"] = r_at_3;
  j["fid"] = fid;
  j["mm_dist"] = mm_dist;
  j["diversity"] = diversity;
  j["diversity_gt"] = diversity_gt;
  j["mmodality"] = mmodality;
  j["eval_reward"] = eval_reward;
  j["n_samples"] = n_samples;
  j["seed"] = seed;
  return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  MetricsReport r;
  r.r_at_1 = j.at("r_at_1").get<double>();
  r.r_at_2 = j.at("r_at_2").get<double>();
  r.r_at_3 = j.at("r_at_3").get<double>();
  r.fid = j.at("fid").get<double>();
  r.mm_dist = j.at("mm_dist").get<double>();
  r.diversity = j.at("diversity").get<double>();
  r.diversity_gt = j.at("diversity_gt").get<double>();
  r.mmodality = j.at("mmodality").get<double>();
  r.eval_reward = j.at("eval_reward").get<double>();
  r.n_samples = j.at("n_samples").get<int>();
  r.seed = j.at("seed").get<uint64_t>();
  return r;
}

}  // namespace dmrl::metrics
