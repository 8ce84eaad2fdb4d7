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

#ifndef DMRL_SCHEDULE_H_
#define DMRL_SCHEDULE_H_

#include <string>
#include <vector>

namespace dmrl::diff {

enum class ScheduleKind { kLinear, kCosine };
const char* schedule_kind_name(ScheduleKind k);
ScheduleKind parse_schedule_kind(const std::string& s);

// Per-step variance tables, 1-based timesteps stored at index t-1.
struct NoiseSchedule {
  int t_diff = 0;
  ScheduleKind kind = ScheduleKind::kLinear;
  std::vector<double> beta;       // beta_t
  std::vector<double> alpha;      // 1 - beta_t
  std::vector<double> alpha_bar;  // running product

  double abar(int t) const { return alpha_bar[static_cast<size_t>(t - 1)]; }
};

// Builds a schedule with 0 < beta_t < 1, alpha_bar strictly decreasing,
// alpha_bar_1 > 0.99 and alpha_bar_T < 0.01. The linear kind scales the
// classic 1e-4..0.02 endpoints by 1000/T (capped); cosine uses the squared
// cosine ramp. Throws if the invariants cannot hold for the requested size.
NoiseSchedule make_schedule(int t_diff, ScheduleKind kind);

// Reverse-process step table over a subsequence of parent timesteps.
// kept timesteps are round(k*T/steps), k = 1..steps, so the noisiest level is
// always the parent terminal one and every alpha_bar value is a parent value.
// The landing level of the last transition is alpha_bar_1 when the chain
// starts above t=1, else exactly 1 (with the usual variance borrow so every
// sampled transition keeps sigma > 0).
struct SamplingChain {
  int parent_t_diff = 0;
  ScheduleKind kind = ScheduleKind::kLinear;
  std::vector<int> t;            // ascending kept parent timesteps
  std::vector<double> abar;      // at kept timesteps
  std::vector<double> abar_prev; // landing level of each transition
  std::vector<double> sigma;     // posterior std per transition
  std::vector<double> coef_x0;   // posterior mean = coef_x0*x0_hat + coef_xt*x_t
  std::vector<double> coef_xt;

  int steps() const { return static_cast<int>(t.size()); }
};

SamplingChain make_chain(const NoiseSchedule& schedule, int steps);

}  // namespace dmrl::diff

#endif  // DMRL_SCHEDULE_H_
