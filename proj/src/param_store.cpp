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

#include "dmrl/param_store.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace dmrl {

uint64_t fnv1a(const void* data, size_t len, uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

Tensor& ParamStore::add(const std::string& name, std::vector<int64_t> shape) {
  auto [it, inserted] = entries.emplace(name, Tensor(std::move(shape)));
  if (!inserted) throw std::runtime_error("ParamStore: duplicate name " + name);
  return it->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = entries.find(name);
  if (it == entries.end()) throw std::runtime_error("ParamStore: missing " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = entries.find(name);
  if (it == entries.end()) throw std::runtime_error("ParamStore: missing " + name);
  return it->second;
}

int64_t ParamStore::total_scalars() const {
  int64_t n = 0;
  for (const auto& [name, t] : entries) n += t.numel();
  return n;
}

uint64_t ParamStore::checksum() const {
  return checksum_if([](const std::string&) { return true; });
}

uint64_t ParamStore::checksum_if(const std::function<bool(const std::string&)>& keep) const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : entries) {
    if (!keep(name)) continue;
    h = fnv1a(name.data(), name.size(), h);
    h = fnv1a(t.data.data(), t.data.size() * sizeof(double), h);
  }
  return h;
}

Tensor& GradStore::lazy(const std::string& name, const std::vector<int64_t>& shape) {
  auto it = entries.find(name);
  if (it == entries.end()) it = entries.emplace(name, Tensor(shape)).first;
  return it->second;
}

void GradStore::accum(const std::string& name, const Tensor& g) {
  Tensor& t = lazy(name, g.shape);
  if (!t.same_shape(g)) throw std::runtime_error("GradStore: shape mismatch for " + name);
  for (int64_t i = 0; i < g.numel(); ++i) t[i] += g[i];
}

void GradStore::add_scaled(const GradStore& other, double a) {
  for (const auto& [name, g] : other.entries) {
    Tensor& t = lazy(name, g.shape);
    for (int64_t i = 0; i < g.numel(); ++i) t[i] += a * g[i];
  }
}

void GradStore::scale(double a) {
  for (auto& [name, g] : entries) {
    for (double& x : g.data) x *= a;
  }
}

double GradStore::global_norm() const {
  double s = 0.0;
  for (const auto& [name, g] : entries) {
    for (double x : g.data) s += x * x;
  }
  return std::sqrt(s);
}

bool GradStore::all_finite() const {
  for (const auto& [name, g] : entries) {
    if (!g.all_finite()) return false;
  }
  return true;
}

}  // namespace dmrl
