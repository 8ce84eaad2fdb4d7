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

#include "dmrl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dmrl {

namespace {

constexpr char kMagic[4] = {'D', 'M', 'R', 'L'};

void write_u16(std::ostream& os, uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); }
void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

uint16_t read_u16(std::istream& is) {
  uint16_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 2);
  return v;
}
uint32_t read_u32(std::istream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

void write_payload(std::ostream& os, const std::vector<const Tensor*>& tensors) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (const Tensor* t : tensors) {
    std::vector<float> buf(t->data.size());
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(t->data[i]);
    const size_t bytes = buf.size() * sizeof(float);
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(bytes));
    hash = fnv1a(buf.data(), bytes, hash);
  }
  write_u64(os, hash);
}

void read_payload(std::istream& is, const std::string& path,
                  const std::vector<Tensor*>& tensors) {
  uint64_t hash = 0xcbf29ce484222325ULL;
  for (Tensor* t : tensors) {
    std::vector<float> buf(t->data.size());
    const size_t bytes = buf.size() * sizeof(float);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!is) throw std::runtime_error("checkpoint truncated: " + path);
    hash = fnv1a(buf.data(), bytes, hash);
    for (size_t i = 0; i < buf.size(); ++i) t->data[i] = static_cast<double>(buf[i]);
  }
  if (read_u64(is) != hash) throw std::runtime_error("checkpoint payload hash mismatch: " + path);
}

nlohmann::json read_header(std::istream& is, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  const uint16_t version = read_u16(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version in " + path);
  }
  read_u16(is);  // reserved
  const uint32_t len = read_u32(is);
  std::string header(len, '\0');
  is.read(header.data(), static_cast<std::streamsize>(len));
  const uint64_t want = read_u64(is);
  if (!is || fnv1a(header.data(), header.size()) != want) {
    throw std::runtime_error("checkpoint header hash mismatch: " + path);
  }
  return nlohmann::json::parse(header);
}

void write_header(std::ostream& os, const nlohmann::json& header) {
  const std::string text = header.dump();
  os.write(kMagic, 4);
  write_u16(os, kCheckpointVersion);
  write_u16(os, 0);
  write_u32(os, static_cast<uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  write_u64(os, fnv1a(text.data(), text.size()));
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind, const ParamStore& params,
                     const nlohmann::json& meta) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  nlohmann::json header;
  header["kind"] = kind;
  header["meta"] = meta;
  nlohmann::json tensors = nlohmann::json::array();
  std::vector<const Tensor*> order;
  for (const auto& [name, t] : params.entries) {
    tensors.push_back({{"name", name}, {"shape", t.shape}});
    order.push_back(&t);
  }
  header["tensors"] = std::move(tensors);
  write_header(os, header);
  write_payload(os, order);
  if (!os) throw std::runtime_error("write failed: " + path);
}

ParamStore load_checkpoint(const std::string& path, const std::string& expect_kind,
                           nlohmann::json* meta_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  const nlohmann::json header = read_header(is, path);
  const std::string kind = header.at("kind").get<std::string>();
  if (kind != expect_kind) {
    throw std::runtime_error("checkpoint kind mismatch in " + path + ": have '" + kind +
                             "', expected '" + expect_kind + "'");
  }
  ParamStore ps;
  std::vector<Tensor*> order;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int64_t> shape = entry.at("shape").get<std::vector<int64_t>>();
    order.push_back(&ps.add(name, shape));
  }
  read_payload(is, path, order);
  if (meta_out != nullptr) *meta_out = header.value("meta", nlohmann::json::object());
  return ps;
}

void save_lora_checkpoint(const std::string& path, const LoraSet& set,
                          const nlohmann::json& meta) {
  ParamStore ps;
  nlohmann::json m = meta;
  nlohmann::json adapters = nlohmann::json::array();
  for (const auto& ad : set.adapters) {
    ps.add(ad.a_name(), ad.A.shape).data = ad.A.data;
    ps.add(ad.b_name(), ad.B.shape).data = ad.B.data;
    adapters.push_back({{"target", ad.target}, {"rank", ad.rank}, {"alpha", ad.alpha}});
  }
  m["adapters"] = std::move(adapters);
  save_checkpoint(path, "lora", ps, m);
}

LoraSet load_lora_checkpoint(const std::string& path, nlohmann::json* meta_out) {
  nlohmann::json meta;
  ParamStore ps = load_checkpoint(path, "lora", &meta);
  LoraSet set;
  for (const auto& entry : meta.at("adapters")) {
    LoraAdapter ad;
    ad.target = entry.at("target").get<std::string>();
    ad.rank = entry.at("rank").get<int>();
    ad.alpha = entry.at("alpha").get<double>();
    ad.A = ps.get(ad.target + ".lora_A");
    ad.B = ps.get(ad.target + ".lora_B");
    set.adapters.push_back(std::move(ad));
  }
  if (meta_out != nullptr) *meta_out = meta;
  return set;
}

}  // namespace dmrl
