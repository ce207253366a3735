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

#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "eaglet/model.hpp"
#include "eaglet/real.hpp"
#include "eaglet/tensor.hpp"
#include "json.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "EGLC" container: magic, u32 LE version, u64 LE header length, JSON header
// {"meta": ..., "tensors": [{"name", "shape", "offset"}]}, then float32 LE
// payloads at the listed byte offsets (relative to the payload start).
struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  // Throws ValidationError if `name` is absent.
  const Tensor& get(const std::string& name) const;
};

std::string serialize_checkpoint(const nlohmann::json& meta,
                                  const std::vector<std::pair<std::string, Tensor>>& tensors);
Checkpoint deserialize_checkpoint(const std::string& bytes);

// Writes through a temporary file and renames, so a failure never leaves a
// partial checkpoint at `path`.
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, Tensor>>& tensors);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws ValidationError unless j is an object whose keys all lie in `known`.
void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& what);

// Strict conversions: unknown keys raise ValidationError.
nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

void save_target(const std::filesystem::path& path, const TransformerWeights& weights);
TransformerWeights load_target(const std::filesystem::path& path);
TransformerWeights target_from_checkpoint(const Checkpoint& ckpt);

// Writes `contents` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace EAGLET_ABI
}  // namespace eaglet
