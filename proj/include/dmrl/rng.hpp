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

#ifndef DMRL_RNG_H_
#define DMRL_RNG_H_

#include <cstdint>
#include <initializer_list>

namespace dmrl {

uint64_t splitmix64(uint64_t& state);
uint64_t hash_combine(uint64_t seed, uint64_t v);

// xoshiro256++ with splitmix64 seeding. Self-contained so that sampled values
// do not depend on the standard library implementation. stream() derives an
// independent generator from the root seed plus a list of tags; workers get
// their own stream per (iteration, slot, ...) and never share state.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  Rng stream(std::initializer_list<uint64_t> tags) const;

  uint64_t next_u64();
  double uniform();                  // [0, 1)
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);   // inclusive bounds
  double gaussian();                 // N(0, 1), Box-Muller

  uint64_t seed_tag() const { return seed_tag_; }

 private:
  uint64_t s_[4];
  uint64_t seed_tag_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dmrl

#endif  // DMRL_RNG_H_
