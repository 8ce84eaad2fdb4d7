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

#include "dmrl/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace dmrl::world {

namespace {

double speed_factor(Speed s) {
  switch (s) {
    case Speed::kSlow: return 0.55;
    case Speed::kMedium: return 1.0;
    case Speed::kFast: return 1.8;
  }
  return 1.0;
}

double size_factor(SizeClass s) { return s == SizeClass::kSmall ? 0.55 : 1.3; }

void set_heading(MotionSequence& m, int t, double angle) {
  m.at(t, kHeadSin) = std::sin(angle);
  m.at(t, kHeadCos) = std::cos(angle);
}

// Walking gait: anti-phase limb swing with speed-scaled frequency.
void gait_limbs(MotionSequence& m, double speed_f, double phase, double amp = 0.25) {
  const double w = 0.7 * speed_f;
  for (int t = 0; t < kFrames; ++t) {
    m.at(t, kLimbA) = amp * std::sin(w * t + phase);
    m.at(t, kLimbB) = amp * std::sin(w * t + phase + M_PI);
  }
}

void heading_from_path(MotionSequence& m) {
  for (int t = 0; t < kFrames; ++t) {
    const int a = t == 0 ? 0 : t - 1;
    const int b = t == kFrames - 1 ? kFrames - 1 : t + 1;
    const double dx = m.at(b, kRootX) - m.at(a, kRootX);
    const double dy = m.at(b, kRootY) - m.at(a, kRootY);
    set_heading(m, t, std::atan2(dy, dx));
  }
}

}  // namespace

MotionSequence gen_motion(const PromptSpec& spec, Rng& rng) {
  MotionSequence m;
  const double sf = speed_factor(spec.speed);
  const double zf = size_factor(spec.size);
  // Phase jitter is kept narrow so family centroids stay informative.
  const double phase = rng.uniform(0.0, M_PI / 3.0);
  const double jr = 1.0 + rng.uniform(-0.1, 0.1);  // radius/step jitter
  const double cx = rng.uniform(-0.25, 0.25);
  const double cy = rng.uniform(-0.25, 0.25);

  switch (spec.family) {
    case Family::kCircleCw:
    case Family::kCircleCcw: {
      const bool ccw = spec.family == Family::kCircleCcw;
      const double radius = 1.1 * zf * jr;
      // Minimum sweep keeps slow arcs visibly curved.
      const double omega = M_PI * (0.55 + 0.45 * sf) / (kFrames - 1);
      for (int t = 0; t < kFrames; ++t) {
        const double th = ccw ? phase + omega * t : phase - omega * t;
        m.at(t, kRootX) = cx + radius * std::cos(th);
        m.at(t, kRootY) = cy + radius * std::sin(th);
        set_heading(m, t, ccw ? th + M_PI / 2.0 : th - M_PI / 2.0);
      }
      gait_limbs(m, sf, phase);
      break;
    }
    case Family::kLineNorth:
    case Family::kLineEast:
    case Family::kLineWest: {
      double dirx = 0.0, diry = 1.0;
      if (spec.family == Family::kLineEast) { dirx = 1.0; diry = 0.0; }
      if (spec.family == Family::kLineWest) { dirx = -1.0; diry = 0.0; }
      const double step = 0.05 * sf * jr;
      const double half = step * (kFrames - 1) / 2.0;
      const double wobble = spec.size == SizeClass::kSmall ? 0.02 : 0.06;
      const double wphase = rng.uniform(0.0, M_PI / 4.0);
      for (int t = 0; t < kFrames; ++t) {
        const double along = -half + step * t;
        const double across = wobble * std::sin(0.6 * t + wphase);
        m.at(t, kRootX) = cx + dirx * along - diry * across;
        m.at(t, kRootY) = cy + diry * along + dirx * across;
        set_heading(m, t, std::atan2(diry, dirx) + 0.05 * std::sin(0.6 * t + wphase));
      }
      gait_limbs(m, sf, phase);
      break;
    }
    case Family::kZigzag: {
      const double step = 0.045 * sf * jr;
      const double amp = 0.35 * zf;
      const double half = step * (kFrames - 1) / 2.0;
      for (int t = 0; t < kFrames; ++t) {
        m.at(t, kRootX) = cx + amp * std::sin(0.55 * sf * t + phase);
        m.at(t, kRootY) = cy - half + step * t;
      }
      heading_from_path(m);
      gait_limbs(m, sf, phase);
      break;
    }
    case Family::kFigureEight: {
      const double radius = 1.2 * zf * jr;
      // At least one full figure regardless of speed.
      const double omega = 2.0 * M_PI * (0.8 + 0.35 * sf) / (kFrames - 1);
      for (int t = 0; t < kFrames; ++t) {
        const double ph = phase + omega * t;
        m.at(t, kRootX) = cx + radius * std::sin(ph);
        m.at(t, kRootY) = cy + radius * std::sin(ph) * std::cos(ph);
      }
      heading_from_path(m);
      gait_limbs(m, sf, phase);
      break;
    }
    case Family::kSpinLeft:
    case Family::kSpinRight: {
      const bool left = spec.family == Family::kSpinLeft;
      const double omega = 0.28 * sf;
      const double amp = 0.3 * zf;
      double x = 0.5 * cx, y = 0.5 * cy;
      for (int t = 0; t < kFrames; ++t) {
        x += rng.uniform(-0.003, 0.003);
        y += rng.uniform(-0.003, 0.003);
        m.at(t, kRootX) = x;
        m.at(t, kRootY) = y;
        set_heading(m, t, left ? phase + omega * t : phase - omega * t);
        m.at(t, kLimbA) = amp * std::sin(omega * t + phase);
        m.at(t, kLimbB) = amp * std::cos(omega * t + phase);
      }
      break;
    }
    case Family::kWaveLimbA:
    case Family::kWaveLimbB: {
      const bool first = spec.family == Family::kWaveLimbA;
      const double amp = (0.3 + 0.25 * zf) * jr;
      const double freq = 0.5 * sf;
      const double head = rng.uniform(0.0, M_PI / 3.0);
      double x = 0.5 * cx, y = 0.5 * cy;
      for (int t = 0; t < kFrames; ++t) {
        x += rng.uniform(-0.003, 0.003);
        y += rng.uniform(-0.003, 0.003);
        m.at(t, kRootX) = x;
        m.at(t, kRootY) = y;
        set_heading(m, t, head);
        // The waving limb swings around a raised baseline.
        const double wave = amp * (0.6 + 0.4 * std::sin(freq * t + phase));
        const double rest = 0.04 * std::sin(0.3 * t + phase);
        m.at(t, kLimbA) = first ? wave : rest;
        m.at(t, kLimbB) = first ? rest : wave;
      }
      break;
    }
    case Family::kStandStill: {
      const double head = rng.uniform(0.0, M_PI / 3.0);
      double x = 0.5 * cx, y = 0.5 * cy;
      for (int t = 0; t < kFrames; ++t) {
        x += rng.uniform(-0.004, 0.004);
        y += rng.uniform(-0.004, 0.004);
        m.at(t, kRootX) = x;
        m.at(t, kRootY) = y;
        set_heading(m, t, head + 0.02 * std::sin(0.2 * t + phase));
        m.at(t, kLimbA) = 0.04 * std::sin(0.2 * t + phase);
        m.at(t, kLimbB) = 0.04 * std::cos(0.2 * t + phase);
      }
      break;
    }
  }
  m.frames.require_finite("gen_motion output");
  return m;
}

double path_length(const MotionSequence& m) {
  double len = 0.0;
  for (int t = 1; t < kFrames; ++t) {
    const double dx = m.at(t, kRootX) - m.at(t - 1, kRootX);
    const double dy = m.at(t, kRootY) - m.at(t - 1, kRootY);
    len += std::sqrt(dx * dx + dy * dy);
  }
  return len;
}

double signed_area(const MotionSequence& m) {
  double a = 0.0;
  for (int t = 0; t < kFrames; ++t) {
    const int u = (t + 1) % kFrames;
    a += m.at(t, kRootX) * m.at(u, kRootY) - m.at(u, kRootX) * m.at(t, kRootY);
  }
  return 0.5 * a;
}

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kCrossDomain: return "cross-domain";
    case Protocol::kLeaveOneOut: return "leave-one-out";
    case Protocol::kFull: return "full";
  }
  return "?";
}

Protocol parse_protocol(const std::string& s) {
  if (s == "cross-domain") return Protocol::kCrossDomain;
  if (s == "leave-one-out") return Protocol::kLeaveOneOut;
  if (s == "full") return Protocol::kFull;
  throw std::runtime_error("unknown protocol: '" + s + "'");
}

std::vector<Family> locomotion_families() {
  return {Family::kCircleCw, Family::kCircleCcw, Family::kLineNorth, Family::kLineEast,
          Family::kLineWest, Family::kZigzag, Family::kFigureEight};
}

std::vector<Family> limb_posture_families() {
  return {Family::kSpinLeft, Family::kSpinRight, Family::kWaveLimbA, Family::kWaveLimbB,
          Family::kStandStill};
}

namespace {

std::vector<PromptInstance> instances_for(const std::vector<Family>& fams, int per_spec) {
  std::vector<PromptInstance> out;
  for (Family f : fams) {
    for (int s = 0; s < 3; ++s) {
      for (int z = 0; z < 2; ++z) {
        PromptSpec spec{f, static_cast<Speed>(s), static_cast<SizeClass>(z)};
        const PromptTokens toks = tokenize(render_prompt(spec));
        for (int i = 0; i < per_spec; ++i) out.push_back({spec, i, toks});
      }
    }
  }
  return out;
}

// Deterministic shuffle + split into (train, eval) by ratio.
std::pair<std::vector<PromptInstance>, std::vector<PromptInstance>> partition(
    std::vector<PromptInstance> items, double ratio, Rng rng) {
  for (size_t i = items.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
    std::swap(items[i - 1], items[j]);
  }
  const size_t n_train = static_cast<size_t>(std::llround(ratio * static_cast<double>(items.size())));
  std::vector<PromptInstance> train(items.begin(), items.begin() + static_cast<int64_t>(n_train));
  std::vector<PromptInstance> eval(items.begin() + static_cast<int64_t>(n_train), items.end());
  return {std::move(train), std::move(eval)};
}

MotionSplit attach_motion(const std::string& name, const std::vector<PromptInstance>& prompts,
                          const Rng& root) {
  MotionSplit split;
  split.name = name;
  split.records.reserve(prompts.size());
  for (const PromptInstance& p : prompts) {
    Rng r = root.stream({0x6d6f74696fULL, static_cast<uint64_t>(p.spec.family),
                         static_cast<uint64_t>(p.spec.speed), static_cast<uint64_t>(p.spec.size),
                         static_cast<uint64_t>(p.instance_id)});
    split.records.push_back({p, gen_motion(p.spec, r)});
  }
  return split;
}

}  // namespace

SplitBundle make_split(Protocol protocol, const std::vector<Family>& held_out, double ratio,
                       int per_spec, uint64_t seed) {
  if (ratio <= 0.0 || ratio >= 1.0) throw std::runtime_error("make_split: ratio must be in (0,1)");
  if (per_spec < 1) throw std::runtime_error("make_split: per_spec must be >= 1");
  SplitBundle b;
  b.protocol = protocol;
  b.held_out = held_out;
  b.ratio = ratio;
  b.per_spec = per_spec;
  b.seed = seed;
  Rng root(seed);

  std::vector<Family> group_a, group_b;
  switch (protocol) {
    case Protocol::kFull: {
      std::vector<Family> all;
      for (int f = 0; f < kFamilyCount; ++f) all.push_back(static_cast<Family>(f));
      b.pretrain_train = attach_motion("full-train", instances_for(all, per_spec), root);
      b.pretrain_eval.name = "full-eval";
      b.adapt_train.name = "full-adapt-train";
      b.adapt_eval.name = "full-adapt-eval";
      return b;
    }
    case Protocol::kCrossDomain:
      group_a = locomotion_families();
      group_b = limb_posture_families();
      break;
    case Protocol::kLeaveOneOut: {
      if (held_out.empty()) throw std::runtime_error("make_split: leave-one-out needs held_out");
      std::set<int> held;
      for (Family f : held_out) held.insert(static_cast<int>(f));
      if (static_cast<int>(held.size()) >= kFamilyCount) {
        throw std::runtime_error("make_split: held_out covers all families");
      }
      for (int f = 0; f < kFamilyCount; ++f) {
        if (held.count(f)) {
          group_b.push_back(static_cast<Family>(f));
        } else {
          group_a.push_back(static_cast<Family>(f));
        }
      }
      break;
    }
  }

  auto [ptr_train, ptr_eval] = partition(instances_for(group_a, per_spec), ratio, root.stream({1}));
  b.pretrain_train = attach_motion("pretrain-train", ptr_train, root);
  b.pretrain_eval = attach_motion("pretrain-eval", ptr_eval, root);
  auto [ad_train, ad_eval] = partition(instances_for(group_b, per_spec), ratio, root.stream({2}));
  b.adapt_train = {"adapt-train", std::move(ad_train)};
  b.adapt_eval = {"adapt-eval", std::move(ad_eval)};
  return b;
}

namespace {

nlohmann::json prompt_json(const PromptInstance& p) {
  nlohmann::json j;
  j["prompt_text"] = p.tokens.text;
  j["family"] = family_name(p.spec.family);
  j["speed"] = speed_name(p.spec.speed);
  j["size"] = size_name(p.spec.size);
  return j;
}

PromptInstance prompt_from_json(const nlohmann::json& j, int line_no) {
  PromptInstance p;
  p.spec.family = parse_family(j.at("family").get<std::string>());
  p.spec.speed = parse_speed(j.at("speed").get<std::string>());
  p.spec.size = parse_size(j.at("size").get<std::string>());
  p.instance_id = line_no;
  p.tokens = tokenize(j.at("prompt_text").get<std::string>());
  return p;
}

}  // namespace

void write_motion_jsonl(const std::string& path, const MotionSplit& split) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const MotionRecord& r : split.records) {
    nlohmann::json j = prompt_json(r.prompt);
    nlohmann::json frames = nlohmann::json::array();
    for (int t = 0; t < kFrames; ++t) {
      nlohmann::json row = nlohmann::json::array();
      for (int c = 0; c < kChannels; ++c) row.push_back(r.motion.at(t, c));
      frames.push_back(std::move(row));
    }
    j["frames"] = std::move(frames);
    os << j.dump() << "\n";
  }
}

void write_prompts_jsonl(const std::string& path, const PromptOnlySplit& split) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  for (const PromptInstance& p : split.prompts) os << prompt_json(p).dump() << "\n";
}

MotionSplit read_motion_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  MotionSplit split;
  split.name = path;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    MotionRecord rec;
    rec.prompt = prompt_from_json(j, n++);
    const auto& frames = j.at("frames");
    if (frames.size() != kFrames) throw std::runtime_error("bad frame count in " + path);
    for (int t = 0; t < kFrames; ++t) {
      for (int c = 0; c < kChannels; ++c) rec.motion.at(t, c) = frames[t][c].get<double>();
    }
    split.records.push_back(std::move(rec));
  }
  return split;
}

PromptOnlySplit read_prompts_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path);
  PromptOnlySplit split;
  split.name = path;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    if (j.contains("frames")) throw std::runtime_error("prompt-only split contains frames: " + path);
    split.prompts.push_back(prompt_from_json(j, n++));
  }
  return split;
}

}  // namespace dmrl::world
