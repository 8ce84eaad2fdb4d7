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

#ifndef DMRL_PROTOCOL_H_
#define DMRL_PROTOCOL_H_

#include <string>
#include <vector>

#include "dmrl/ddpo.hpp"
#include "dmrl/metrics.hpp"

namespace dmrl::protocol {

struct EvalConfig {
  std::string sampler = "fast";  // "fast" or "ancestral"
  int fast_steps = 10;
  int rl_steps = 10;
  double cfg_scale = 2.5;
  int pool = 32;
  int r_shuffles = 8;
  int diversity_pairs = 300;
  int mmodality_prompts = 16;
  int mmodality_repeats = 10;
};

// A checkpointed policy: frozen backbone plus optional adapters.
struct ModelHandle {
  const diff::Denoiser* model = nullptr;
  const ParamStore* params = nullptr;
  const LoraSet* lora = nullptr;  // null = pretrained baseline
};

// One generated motion per prompt; all metrics in the evaluator's feature
// space against the reference set. Deterministic given seed.
metrics::MetricsReport evaluate_model(const ModelHandle& handle,
                                      const std::vector<world::PromptInstance>& prompts,
                                      const std::vector<world::MotionSequence>& reference,
                                      const reward::DualEncoder& evaluator,
                                      const diff::NoiseSchedule& schedule, const EvalConfig& cfg,
                                      uint64_t seed);

// Fresh ground-truth draws for a prompt list (used where the dataset is
// prompts-only; evaluation may consult the generator, the trainer may not).
std::vector<world::MotionSequence> reference_motions(
    const std::vector<world::PromptInstance>& prompts, uint64_t seed);

enum class ProtocolName { kCrossDomain, kLeaveOneOut, kForgetting };
const char* protocol_label(ProtocolName p);
ProtocolName parse_protocol_name(const std::string& s);

struct ProtocolReports {
  metrics::MetricsReport pre, post;
};

// cross-domain / leave-one-out: both checkpoints on the adaptation eval
// prompts. forgetting: both checkpoints on the pretraining eval split (its
// stored motions are the reference).
ProtocolReports run_protocol(ProtocolName name, const ModelHandle& pre, const ModelHandle& post,
                             const world::SplitBundle& splits,
                             const reward::DualEncoder& evaluator,
                             const diff::NoiseSchedule& schedule, const EvalConfig& cfg,
                             uint64_t seed);

}  // namespace dmrl::protocol

#endif  // DMRL_PROTOCOL_H_
