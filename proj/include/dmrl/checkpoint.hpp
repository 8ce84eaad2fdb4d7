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

#ifndef DMRL_CHECKPOINT_H_
#define DMRL_CHECKPOINT_H_

#include <string>

#include <json.hpp>

#include "dmrl/lora.hpp"
#include "dmrl/param_store.hpp"

namespace dmrl {

// Binary checkpoint: magic "DMRL", u16 format version, u32 header length,
// JSON header {kind, tensors: [{name, shape}...], meta}, u64 header hash,
// then the tensors as little-endian f32 in header order, u64 payload hash.
// In-memory values are f64; storage quantizes to f32 (<= 1e-6 relative).
inline constexpr uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const std::string& kind, const ParamStore& params,
                     const nlohmann::json& meta);

// Verifies magic, version and both hashes, and fails before reading any
// tensor when the stored kind differs from expect_kind.
ParamStore load_checkpoint(const std::string& path, const std::string& expect_kind,
                           nlohmann::json* meta_out = nullptr);

void save_lora_checkpoint(const std::string& path, const LoraSet& set,
                          const nlohmann::json& meta);
LoraSet load_lora_checkpoint(const std::string& path, nlohmann::json* meta_out = nullptr);

}  // namespace dmrl

#endif  // DMRL_CHECKPOINT_H_
