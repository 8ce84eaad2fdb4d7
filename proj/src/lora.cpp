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

#include "dmrl/lora.hpp"

#include <stdexcept>

namespace dmrl {

LoraAdapter LoraAdapter::init(const std::string& target, int64_t d_out, int64_t d_in, int rank,
                              double alpha, Rng& rng) {
  if (rank < 1) throw std::runtime_error("LoraAdapter: rank must be >= 1");
  LoraAdapter ad;
  ad.target = target;
  ad.rank = rank;
  ad.alpha = alpha;
  ad.A = Tensor({rank, d_in});
  ad.B = Tensor({d_out, rank});
  for (double& x : ad.A.data) x = 0.01 * rng.gaussian();
  return ad;
}

const LoraAdapter* LoraSet::find(const std::string& target) const {
  for (const auto& ad : adapters) {
    if (ad.target == target) return &ad;
  }
  return nullptr;
}

LoraAdapter* LoraSet::find(const std::string& target) {
  for (auto& ad : adapters) {
    if (ad.target == target) return &ad;
  }
  return nullptr;
}

int64_t LoraSet::trainable_scalars() const {
  int64_t n = 0;
  for (const auto& ad : adapters) n += ad.trainable_scalars();
  return n;
}

uint64_t LoraSet::checksum() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& ad : adapters) {
    h = fnv1a(ad.target.data(), ad.target.size(), h);
    h = fnv1a(ad.A.data.data(), ad.A.data.size() * sizeof(double), h);
    h = fnv1a(ad.B.data.data(), ad.B.data.size() * sizeof(double), h);
  }
  return h;
}

bool LoraSet::all_b_zero() const {
  for (const auto& ad : adapters) {
    for (double x : ad.B.data) {
      if (x != 0.0) return false;
    }
  }
  return true;
}

namespace {
void apply_delta(Tensor& w, const LoraAdapter& ad, double sign) {
  if (w.shape.size() != 2 || w.rows() != ad.d_out() || w.cols() != ad.d_in()) {
    throw std::runtime_error("lora_merge: shape mismatch for " + ad.target);
  }
  const double s = sign * ad.scale();
  const int64_t rows = w.rows(), cols = w.cols(), r = ad.rank;
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t k = 0; k < r; ++k) {
      const double bik = s * ad.B.at2(i, k);
      const double* ak = ad.A.ptr() + k * cols;
      double* wi = w.ptr() + i * cols;
      for (int64_t j = 0; j < cols; ++j) wi[j] += bik * ak[j];
    }
  }
}
}  // namespace

ParamStore lora_merge(const ParamStore& params, const LoraAdapter& ad) {
  ParamStore out = params;
  apply_delta(out.get(ad.target), ad, +1.0);
  return out;
}

ParamStore lora_merge(const ParamStore& params, const LoraSet& set) {
  ParamStore out = params;
  for (const auto& ad : set.adapters) apply_delta(out.get(ad.target), ad, +1.0);
  return out;
}

ParamStore lora_unmerge(const ParamStore& params, const LoraAdapter& ad) {
  ParamStore out = params;
  apply_delta(out.get(ad.target), ad, -1.0);
  return out;
}

}  // namespace dmrl
