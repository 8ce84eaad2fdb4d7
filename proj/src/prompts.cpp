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

#include "dmrl/prompts.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace dmrl::world {

namespace {

const char* kFamilyNames[kFamilyCount] = {
    "circle-cw", "circle-ccw", "line-north",  "line-east",   "line-west",   "zigzag",
    "figure-eight", "spin-left", "spin-right", "wave-limb-a", "wave-limb-b", "stand-still",
};

const char* kSpeedNames[3] = {"slow", "medium", "fast"};
const char* kSizeNames[2] = {"small", "large"};

const char* kSpeedWords[3] = {"slowly", "steadily", "quickly"};

std::string template_for(Family f, const std::string& size_word, const std::string& speed_word) {
  switch (f) {
    case Family::kCircleCw:
      return "a person walks in a " + size_word + " circle clockwise " + speed_word;
    case Family::kCircleCcw:
      return "a person walks in a " + size_word + " circle counterclockwise " + speed_word;
    case Family::kLineNorth:
      return "a person walks north in a " + size_word + " straight line " + speed_word;
    case Family::kLineEast:
      return "a person walks east in a " + size_word + " straight line " + speed_word;
    case Family::kLineWest:
      return "a person walks west in a " + size_word + " straight line " + speed_word;
    case Family::kZigzag:
      return "a person walks in a " + size_word + " zigzag pattern " + speed_word;
    case Family::kFigureEight:
      return "a person walks in a " + size_word + " figure eight " + speed_word;
    case Family::kSpinLeft:
      return "a person spins to the left " + speed_word + " with a " + size_word + " sway";
    case Family::kSpinRight:
      return "a person spins to the right " + speed_word + " with a " + size_word + " sway";
    case Family::kWaveLimbA:
      return "a person waves the first arm " + speed_word + " in a " + size_word + " motion";
    case Family::kWaveLimbB:
      return "a person waves the second arm " + speed_word + " in a " + size_word + " motion";
    case Family::kStandStill:
      return "a person stands still " + speed_word + " holding a " + size_word + " pose";
  }
  throw std::runtime_error("unknown family");
}

}  // namespace

Vocab::Vocab() {
  words_ = {"<pad>", "<null>"};
  const char* body[] = {
      "a",     "person", "walks",  "in",    "circle", "clockwise", "counterclockwise",
      "north", "east",   "west",   "straight", "line", "zigzag",   "pattern",
      "figure", "eight", "spins",  "to",    "the",    "left",      "right",
      "with",  "sway",   "waves",  "first", "second", "arm",       "motion",
      "stands", "still", "holding", "pose", "slowly", "steadily",  "quickly",
      "small", "large",
  };
  for (const char* w : body) words_.emplace_back(w);
}

const Vocab& Vocab::instance() {
  static Vocab v;
  return v;
}

int32_t Vocab::id(const std::string& word) const {
  for (size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] == word) return static_cast<int32_t>(i);
  }
  throw std::runtime_error("word not in vocabulary: '" + word + "'");
}

const std::string& Vocab::word(int32_t id) const {
  if (id < 0 || id >= size()) throw std::runtime_error("token id out of range");
  return words_[static_cast<size_t>(id)];
}

const char* family_name(Family f) { return kFamilyNames[static_cast<int>(f)]; }
const char* speed_name(Speed s) { return kSpeedNames[static_cast<int>(s)]; }
const char* size_name(SizeClass s) { return kSizeNames[static_cast<int>(s)]; }

Family parse_family(const std::string& s) {
  for (int i = 0; i < kFamilyCount; ++i) {
    if (s == kFamilyNames[i]) return static_cast<Family>(i);
  }
  throw std::runtime_error("unknown family: '" + s + "'");
}

Speed parse_speed(const std::string& s) {
  for (int i = 0; i < 3; ++i) {
    if (s == kSpeedNames[i]) return static_cast<Speed>(i);
  }
  throw std::runtime_error("unknown speed: '" + s + "'");
}

SizeClass parse_size(const std::string& s) {
  for (int i = 0; i < 2; ++i) {
    if (s == kSizeNames[i]) return static_cast<SizeClass>(i);
  }
  throw std::runtime_error("unknown size: '" + s + "'");
}

std::string render_prompt(const PromptSpec& spec) {
  return template_for(spec.family, kSizeNames[static_cast<int>(spec.size)],
                      kSpeedWords[static_cast<int>(spec.speed)]);
}

PromptTokens tokenize(const std::string& text) {
  const Vocab& v = Vocab::instance();
  PromptTokens out;
  out.text = text;
  out.ids.fill(kPadId);
  std::istringstream is(text);
  std::string word;
  int n = 0;
  while (is >> word) {
    if (n >= kPromptLen) throw std::runtime_error("prompt longer than " + std::to_string(kPromptLen) + " tokens");
    out.ids[static_cast<size_t>(n++)] = v.id(word);
  }
  return out;
}

PromptTokens null_prompt() {
  PromptTokens t;
  t.ids.fill(kNullId);
  t.text = "";
  return t;
}

bool is_null_prompt(const PromptTokens& t) {
  for (int32_t id : t.ids) {
    if (id != kNullId) return false;
  }
  return true;
}

std::vector<PromptSpec> all_specs() {
  std::vector<PromptSpec> specs;
  for (int f = 0; f < kFamilyCount; ++f) {
    for (int s = 0; s < 3; ++s) {
      for (int z = 0; z < 2; ++z) {
        specs.push_back({static_cast<Family>(f), static_cast<Speed>(s), static_cast<SizeClass>(z)});
      }
    }
  }
  return specs;
}

}  // namespace dmrl::world
