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

#ifndef DMRL_METRICS_H_
#define DMRL_METRICS_H_

#include <functional>
#include <string>
#include <vector>

#include "dmrl/rng.hpp"
#include "dmrl/tensor.hpp"

namespace dmrl::metrics {

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major n x n).
// Returns eigenvalues; eigvecs (optional) gets the orthonormal columns.
std::vector<double> eig_sym(const Tensor& m, Tensor* eigvecs = nullptr);

// Frechet distance between Gaussian fits of two feature sets (n x e rows).
//   ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa^1/2 Sb Sa^1/2)^1/2)
// Population covariances with `shrink`*I added before the matrix square
// root. Tiny negative eigenvalues (> -1e-8) are clamped to zero; anything
// more negative is an eigendecomposition failure.
double frechet(const Tensor& feats_a, const Tensor& feats_b, double shrink = 1e-6);

// Retrieval accuracy: each sample ranks its own text among 1 true +
// (pool - 1) random distractor texts by Euclidean feature distance,
// averaged over `shuffles` distractor draws.
double r_precision(const Tensor& gen_feats, const Tensor& text_feats, int pool, int k,
                   int shuffles, Rng& rng);

// Mean Euclidean distance between each generated feature and its own prompt
// feature.
double mm_dist(const Tensor& gen_feats, const Tensor& text_feats);

// Mean Euclidean distance over n_pairs random index pairs (i != j).
double diversity(const Tensor& feats, int n_pairs, Rng& rng);

// Mean within-prompt pairwise feature distance over repeated generations.
// sample_feat(prompt_idx, repeat_idx) returns one feature vector.
double multimodality(const std::function<std::vector<double>(int, int)>& sample_feat,
                     int n_prompts, int repeats);

struct MetricsReport {
  double r_at_1 = 0.0, r_at_2 = 0.0, r_at_3 = 0.0;
  double fid = 0.0;
  double mm_dist = 0.0;
  double diversity = 0.0;
  double diversity_gt = 0.0;  // reference diversity of the ground truth set
  double mmodality = 0.0;
  double eval_reward = 0.0;   // mean evaluator-space cosine to the own prompt
  int n_samples = 0;
  uint64_t seed = 0;

  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
};

}  // namespace dmrl::metrics

#endif  // DMRL_METRICS_H_
