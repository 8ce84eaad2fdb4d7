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

#ifndef DMRL_REWARD_H_
#define DMRL_REWARD_H_

#include <functional>
#include <string>
#include <vector>

#include "dmrl/mlp.hpp"
#include "dmrl/synthworld.hpp"

namespace dmrl::reward {

struct EncoderConfig {
  int emb = 32;
  std::vector<int> motion_hidden = {96, 64};
  std::vector<int> text_hidden = {64};
  int token_emb = 32;
  double tau_init = 0.07;
  int vocab = 0;  // 0 = global vocabulary
};

// Text/motion dual encoder with L2-normalized embeddings. The cosine of the
// two embeddings is the scalar reward; it is trained with a symmetric
// in-batch InfoNCE loss and frozen before any policy optimization.
class DualEncoder {
 public:
  DualEncoder(EncoderConfig cfg, uint64_t init_seed);

  const EncoderConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  std::vector<double> encode_motion(const world::MotionSequence& m) const;
  std::vector<double> encode_motion_flat(const Tensor& flat) const;
  std::vector<double> encode_text(const world::PromptTokens& tokens) const;

  double tau() const;

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }
  uint64_t checksum() const { return params_.checksum(); }

  struct TrainStats {
    double final_loss = 0.0;
    int iters = 0;
  };

  // Symmetric InfoNCE over in-batch negatives; batches draw one instance per
  // distinct spec so a text never meets its own duplicate as a negative.
  TrainStats train_contrastive(const world::MotionSplit& data, int batch, int iters, double lr,
                               Rng& rng, const std::function<void(int, double)>& on_log = nullptr);

  // Backward entry points used by the trainer (and its tests).
  struct MotionCache {
    nn::MlpCache mlp;
    std::vector<double> pre_norm;
  };
  struct TextCache {
    world::PromptTokens tokens;
    std::vector<double> pool;
    nn::MlpCache mlp;
    std::vector<double> pre_norm;
  };
  std::vector<double> encode_motion_cached(const Tensor& flat, MotionCache& cache) const;
  std::vector<double> encode_text_cached(const world::PromptTokens& tokens, TextCache& cache) const;
  void backward_motion(const MotionCache& cache, const double* g_emb, GradStore& gs) const;
  void backward_text(const TextCache& cache, const double* g_emb, GradStore& gs) const;

  // Replaces the parameters with a loaded store (names/shapes must match).
  void load_params(ParamStore&& ps);

 private:
  EncoderConfig cfg_;
  ParamStore params_;
  nn::Mlp motion_mlp_, text_mlp_;
  bool frozen_ = false;
};

// Symmetric InfoNCE over a b x b logits matrix (row i = text i against every
// motion): mean of text->motion and motion->text cross entropies with the
// diagonal as targets. grad (optional, b x b) gets d loss / d logits.
double symmetric_infonce(const std::vector<double>& logits, int b, std::vector<double>* grad);

// r = cos(phi_text(c), phi_motion(x0)) in [-1, 1].
double score(const DualEncoder& enc, const world::MotionSequence& x0,
             const world::PromptTokens& tokens);
double score_flat(const DualEncoder& enc, const Tensor& x0_flat, const world::PromptTokens& tokens);

// Pool-way retrieval accuracy on freshly drawn ground-truth pairs.
double retrieval_r1(const DualEncoder& enc, int pool, int repeats, Rng& rng);

// Mean reward margin between matched and mismatched (motion, prompt) pairs.
double reward_margin(const DualEncoder& enc, int n_samples, Rng& rng);

}  // namespace dmrl::reward

#endif  // DMRL_REWARD_H_
