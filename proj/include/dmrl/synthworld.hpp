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

#ifndef DMRL_SYNTHWORLD_H_
#define DMRL_SYNTHWORLD_H_

#include <string>
#include <vector>

#include "dmrl/prompts.hpp"
#include "dmrl/rng.hpp"
#include "dmrl/tensor.hpp"

namespace dmrl::world {

constexpr int kFrames = 32;
constexpr int kChannels = 6;  // root-x, root-y, heading-sin, heading-cos, limb-a, limb-b
constexpr int kMotionDim = kFrames * kChannels;

enum Channel { kRootX = 0, kRootY, kHeadSin, kHeadCos, kLimbA, kLimbB };

struct MotionSequence {
  Tensor frames;  // kFrames x kChannels

  MotionSequence() : frames({kFrames, kChannels}) {}
  double& at(int t, int c) { return frames.at2(t, c); }
  double at(int t, int c) const { return frames.at2(t, c); }
};

// Draws one trajectory for the spec, with per-sample jitter in phase, radius
// (+-10%) and start pose.
MotionSequence gen_motion(const PromptSpec& spec, Rng& rng);

double path_length(const MotionSequence& m);
double signed_area(const MotionSequence& m);  // shoelace over the root path

struct PromptInstance {
  PromptSpec spec;
  int instance_id = 0;
  PromptTokens tokens;
};

struct MotionRecord {
  PromptInstance prompt;
  MotionSequence motion;
};

// Trainer-facing record type for prompt-only splits: no frames anywhere.
struct PromptOnlySplit {
  std::string name;
  std::vector<PromptInstance> prompts;
};

struct MotionSplit {
  std::string name;
  std::vector<MotionRecord> records;
};

enum class Protocol { kCrossDomain, kLeaveOneOut, kFull };
const char* protocol_name(Protocol p);
Protocol parse_protocol(const std::string& s);

struct SplitBundle {
  MotionSplit pretrain_train, pretrain_eval;
  PromptOnlySplit adapt_train, adapt_eval;
  Protocol protocol = Protocol::kFull;
  std::vector<Family> held_out;
  double ratio = 0.8;
  int per_spec = 0;
  uint64_t seed = 0;
};

std::vector<Family> locomotion_families();    // group A of the cross-domain protocol
std::vector<Family> limb_posture_families();  // group B

// Materializes prompt instances and ground-truth motions, then partitions:
//   cross-domain:  pretrain = group A with motion; adapt = group B, prompts only
//   leave-one-out: pretrain = all minus held_out; adapt = held_out, prompts only
//   full:          everything in pretrain_train, eval splits empty
// Train/eval partitions are disjoint at the instance level using `ratio`.
SplitBundle make_split(Protocol protocol, const std::vector<Family>& held_out, double ratio,
                       int per_spec, uint64_t seed);

// JSONL dataset files: one object per line with fields
// {prompt_text, family, speed, size, frames?}; frames only on motion splits.
void write_motion_jsonl(const std::string& path, const MotionSplit& split);
void write_prompts_jsonl(const std::string& path, const PromptOnlySplit& split);
MotionSplit read_motion_jsonl(const std::string& path);
PromptOnlySplit read_prompts_jsonl(const std::string& path);

}  // namespace dmrl::world

#endif  // DMRL_SYNTHWORLD_H_
