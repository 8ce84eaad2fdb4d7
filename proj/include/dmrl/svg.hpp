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

#ifndef DMRL_SVG_H_
#define DMRL_SVG_H_

#include <string>

#include "dmrl/synthworld.hpp"

namespace dmrl {

// Static plot of one motion: the root path as a polyline whose color runs
// from blue (start) to orange (end), with limb-angle sparklines underneath.
// Dependency-free, hand-emitted SVG.
void write_trajectory_svg(const std::string& path, const world::MotionSequence& motion,
                          const std::string& title);

}  // namespace dmrl

#endif  // DMRL_SVG_H_
