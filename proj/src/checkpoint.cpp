// Copyright 2026 The Eaglet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "eaglet/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "eaglet/errors.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

namespace {

constexpr char kMagic[4] = {'E', 'G', 'L', 'C'};

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const std::string& in, std::size_t at) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return value;
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_le(out, bits);
}

float get_f32(const std::string& in, std::size_t at) {
  const auto bits = get_le<std::uint32_t>(in, at);
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw ValidationError(what + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ValidationError(what + ": unknown key \"" + it.key() + "\"");
  }
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw ValidationError("checkpoint has no tensor \"" + name + "\"");
}

std::string serialize_checkpoint(const nlohmann::json& meta,
                                 const std::vector<std::pair<std::string, Tensor>>& tensors) {
  nlohmann::json header;
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    header["tensors"].push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel() * sizeof(float);
  }
  const std::string header_text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, header_text.size());
  out += header_text;
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : tensors) {
    for (real v : t.data()) put_f32(out, static_cast<float>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ValidationError("not an EGLC checkpoint (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes, 8);
  if (16 + header_len > bytes.size()) throw ValidationError("checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const std::size_t payload = 16 + header_len;
  Checkpoint ckpt;
  ckpt.meta = header.at("meta");
  for (const auto& entry : header.at("tensors")) {
    const auto shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const std::size_t n = shape_numel(shape);
    if (payload + offset + n * sizeof(float) > bytes.size()) {
      throw ValidationError("checkpoint payload truncated at " + entry.at("name").get<std::string>());
    }
    std::vector<real> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = get_f32(bytes, payload + offset + i * sizeof(float));
    ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), Tensor(shape, std::move(data)));
  }
  return ckpt;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, Tensor>>& tensors) {
  write_file_atomic(path, serialize_checkpoint(meta, tensors));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size}, {"hidden_dim", c.hidden_dim}, {"num_layers", c.num_layers},
          {"num_heads", c.num_heads},   {"ffn_dim", c.ffn_dim},       {"max_positions", c.max_positions},
          {"seed", c.seed},             {"norm_eps", c.norm_eps},     {"rope_theta", c.rope_theta}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"vocab_size", "hidden_dim", "num_layers", "num_heads", "ffn_dim", "max_positions", "seed",
                       "norm_eps", "rope_theta"},
                      "model config");
  ModelConfig c;
  try {
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.num_heads = j.value("num_heads", c.num_heads);
    c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
    c.max_positions = j.value("max_positions", c.max_positions);
    c.seed = j.value("seed", c.seed);
    c.norm_eps = j.value("norm_eps", c.norm_eps);
    c.rope_theta = j.value("rope_theta", c.rope_theta);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

void save_target(const std::filesystem::path& path, const TransformerWeights& weights) {
  nlohmann::json meta = {{"kind", "target"}, {"config", model_config_to_json(weights.config)}};
  save_checkpoint(path, meta, weights.named());
}

TransformerWeights target_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.meta.value("kind", "") != "target") throw ValidationError("checkpoint is not a target model");
  ModelConfig config = model_config_from_json(ckpt.meta.at("config"));
  // Build the structure from a fresh init, then overwrite every tensor.
  TransformerWeights w = init_target(config);
  auto named = w.named();
  if (named.size() != ckpt.tensors.size()) {
    throw ValidationError("target checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, expected " +
                          std::to_string(named.size()));
  }
  for (auto& [name, t] : named) {
    const Tensor& src = ckpt.get(name);
    if (src.shape() != t.shape()) {
      throw ValidationError("tensor " + name + " has shape " + shape_str(src.shape()) + ", expected " +
                            shape_str(t.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), t.mutable_data().begin());
  }
  return w;
}

TransformerWeights load_target(const std::filesystem::path& path) {
  return target_from_checkpoint(load_checkpoint(path));
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
