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

#include "dmrl/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmrl::diff {

const char* schedule_kind_name(ScheduleKind k) {
  return k == ScheduleKind::kLinear ? "linear" : "cosine";
}

ScheduleKind parse_schedule_kind(const std::string& s) {
  if (s == "linear") return ScheduleKind::kLinear;
  if (s == "cosine") return ScheduleKind::kCosine;
  throw std::runtime_error("unknown schedule kind: '" + s + "'");
}

NoiseSchedule make_schedule(int t_diff, ScheduleKind kind) {
  if (t_diff < 2) throw std::runtime_error("make_schedule: need t_diff >= 2");
  NoiseSchedule s;
  s.t_diff = t_diff;
  s.kind = kind;
  s.beta.resize(static_cast<size_t>(t_diff));
  if (kind == ScheduleKind::kLinear) {
    const double lo = std::min(0.1 / t_diff, 0.008);
    const double hi = std::min(20.0 / t_diff, 0.999);
    for (int t = 0; t < t_diff; ++t) {
      s.beta[static_cast<size_t>(t)] =
          t_diff == 1 ? lo : lo + (hi - lo) * static_cast<double>(t) / (t_diff - 1);
    }
  } else {
    // Squared-cosine ramp on alpha_bar; beta derived from consecutive ratios.
    const double off = 0.008;
    auto f = [&](double t) {
      const double a = std::cos((t / t_diff + off) / (1.0 + off) * M_PI / 2.0);
      return a * a;
    };
    const double f0 = f(0.0);
    double prev = 1.0;
    for (int t = 1; t <= t_diff; ++t) {
      const double cur = f(static_cast<double>(t)) / f0;
      // The ratio can round to 0 at t = T; keep beta strictly below 1.
      s.beta[static_cast<size_t>(t - 1)] = std::min(1.0 - cur / prev, 1.0 - 1e-12);
      prev = cur;
    }
  }
  s.alpha.resize(s.beta.size());
  s.alpha_bar.resize(s.beta.size());
  double run = 1.0;
  for (size_t i = 0; i < s.beta.size(); ++i) {
    if (!(s.beta[i] > 0.0 && s.beta[i] < 1.0)) {
      throw std::runtime_error("make_schedule: beta out of (0,1)");
    }
    s.alpha[i] = 1.0 - s.beta[i];
    run *= s.alpha[i];
    s.alpha_bar[i] = run;
    if (i > 0 && !(s.alpha_bar[i] < s.alpha_bar[i - 1])) {
      throw std::runtime_error("make_schedule: alpha_bar not strictly decreasing");
    }
  }
  if (!(s.alpha_bar.front() > 0.99)) {
    throw std::runtime_error("make_schedule: alpha_bar_1 <= 0.99 for this size/kind");
  }
  if (!(s.alpha_bar.back() < 0.01)) {
    throw std::runtime_error("make_schedule: alpha_bar_T >= 0.01 for this size/kind");
  }
  return s;
}

SamplingChain make_chain(const NoiseSchedule& schedule, int steps) {
  const int t_diff = schedule.t_diff;
  if (steps < 1 || steps > t_diff) throw std::runtime_error("make_chain: bad step count");
  SamplingChain c;
  c.parent_t_diff = t_diff;
  c.kind = schedule.kind;
  c.t.resize(static_cast<size_t>(steps));
  for (int k = 1; k <= steps; ++k) {
    c.t[static_cast<size_t>(k - 1)] =
        static_cast<int>(std::llround(static_cast<double>(k) * t_diff / steps));
  }
  for (int k = 1; k < steps; ++k) {
    if (c.t[static_cast<size_t>(k)] <= c.t[static_cast<size_t>(k - 1)]) {
      throw std::runtime_error("make_chain: duplicate timesteps");
    }
  }
  c.abar.resize(c.t.size());
  c.abar_prev.resize(c.t.size());
  c.sigma.resize(c.t.size());
  c.coef_x0.resize(c.t.size());
  c.coef_xt.resize(c.t.size());
  std::vector<double> var(c.t.size());
  for (int k = 0; k < steps; ++k) {
    const size_t i = static_cast<size_t>(k);
    c.abar[i] = schedule.abar(c.t[i]);
    if (k > 0) {
      c.abar_prev[i] = c.abar[i - 1];
    } else {
      c.abar_prev[i] = c.t[0] > 1 ? schedule.abar(1) : 1.0;
    }
    const double eff_alpha = c.abar[i] / c.abar_prev[i];
    const double eff_beta = 1.0 - eff_alpha;
    const double one_minus = 1.0 - c.abar[i];
    var[i] = (1.0 - c.abar_prev[i]) / one_minus * eff_beta;
    c.coef_x0[i] = std::sqrt(c.abar_prev[i]) * eff_beta / one_minus;
    c.coef_xt[i] = std::sqrt(eff_alpha) * (1.0 - c.abar_prev[i]) / one_minus;
  }
  // A transition landing exactly at alpha_bar_0 = 1 has zero posterior
  // variance; borrow the next transition's so sampling stays non-degenerate.
  if (var[0] <= 0.0) {
    if (steps < 2) throw std::runtime_error("make_chain: degenerate single-step chain");
    var[0] = var[1];
  }
  for (size_t i = 0; i < var.size(); ++i) {
    if (!(var[i] > 0.0)) throw std::runtime_error("make_chain: non-positive step variance");
    c.sigma[i] = std::sqrt(var[i]);
  }
  return c;
}

}  // namespace dmrl::diff
