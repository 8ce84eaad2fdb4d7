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

#ifndef DMRL_PROMPTS_H_
#define DMRL_PROMPTS_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dmrl::world {

enum class Family : int {
  kCircleCw = 0,
  kCircleCcw,
  kLineNorth,
  kLineEast,
  kLineWest,
  kZigzag,
  kFigureEight,
  kSpinLeft,
  kSpinRight,
  kWaveLimbA,
  kWaveLimbB,
  kStandStill,
};
constexpr int kFamilyCount = 12;

enum class Speed : int { kSlow = 0, kMedium, kFast };
enum class SizeClass : int { kSmall = 0, kLarge };

// Structured motion description; (family, speed, size) fully determines the
// trajectory distribution.
struct PromptSpec {
  Family family = Family::kCircleCw;
  Speed speed = Speed::kMedium;
  SizeClass size = SizeClass::kLarge;

  bool operator==(const PromptSpec&) const = default;
};

constexpr int kPromptLen = 12;  // fixed token count, PAD-right
constexpr int32_t kPadId = 0;
constexpr int32_t kNullId = 1;  // reserved null prompt for the unconditional branch

struct PromptTokens {
  std::array<int32_t, kPromptLen> ids{};
  std::string text;

  bool operator==(const PromptTokens& o) const { return ids == o.ids; }
};

// Closed vocabulary over the template words, PAD = 0, NULL = 1.
class Vocab {
 public:
  static const Vocab& instance();
  int size() const { return static_cast<int>(words_.size()); }
  // Throws naming the word when it is not in the vocabulary.
  int32_t id(const std::string& word) const;
  const std::string& word(int32_t id) const;

 private:
  Vocab();
  std::vector<std::string> words_;
};

const char* family_name(Family f);
const char* speed_name(Speed s);
const char* size_name(SizeClass s);
Family parse_family(const std::string& s);
Speed parse_speed(const std::string& s);
SizeClass parse_size(const std::string& s);

std::string render_prompt(const PromptSpec& spec);
PromptTokens tokenize(const std::string& text);
PromptTokens null_prompt();
bool is_null_prompt(const PromptTokens& t);

std::vector<PromptSpec> all_specs();  // the full 12 x 3 x 2 grid

}  // namespace dmrl::world

#endif  // DMRL_PROMPTS_H_
