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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eaglet/draft_head.hpp"
#include "eaglet/drafting.hpp"
#include "eaglet/engine.hpp"
#include "eaglet/model.hpp"
#include "eaglet/training.hpp"
#include "json.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

struct CorpusSection {
  std::filesystem::path path;
  double held_out_fraction = 0.1;
};

struct TargetSection {
  std::filesystem::path checkpoint;
  std::filesystem::path curve;
  ModelConfig model;
  TargetTrainConfig training;
  // Optional probability-preserving inflation applied after loading.
  std::size_t inflate_layers = 0;
  std::size_t inflate_ffn = 0;
};

struct DraftSection {
  std::filesystem::path checkpoint;
  std::filesystem::path curve;
  DraftInputMode input = DraftInputMode::kFeatureShiftedToken;
  TrainConfig training;
};

struct BenchSection {
  std::size_t prompts = 20;
  std::size_t prompt_length = 32;
  std::size_t max_new_tokens = 64;
  std::size_t repetitions = 5;
  std::size_t warmup = 2;
  std::vector<real> temperatures{0, 1};
  std::vector<DecodeMode> modes{DecodeMode::kChain, DecodeMode::kTree};
  std::uint64_t seed = 1;
  std::filesystem::path report;
};

struct AuditSection {
  std::size_t trials = 100000;
  std::size_t contexts = 4;
  std::size_t second_token_contexts = 2;
  std::size_t context_length = 48;
  real temperature = 1;
  DecodeMode mode = DecodeMode::kChain;
  std::uint64_t seed = 1;
  std::filesystem::path report;
};

struct AlphaSection {
  std::size_t positions = 500;
  std::size_t min_prefix = 32;
  std::size_t max_n = 4;
  std::uint64_t seed = 1;
  std::filesystem::path report;
};

// Everything the command-line tool reads from its JSON config. Unknown keys
// anywhere raise ValidationError; absent keys keep the defaults above.
// Relative paths in the file are resolved against the file's directory.
struct EngineConfig {
  CorpusSection corpus;
  TargetSection target;
  DraftSection draft;
  GenerationParams generation;  // includes the tree topology
  BenchSection bench;
  AuditSection audit;
  AlphaSection alpha;

  static EngineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static EngineConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

// `path` with the short draft-input name inserted before the extension, so
// ablation heads sit next to the default one: draft.eglc -> draft.token.eglc.
std::filesystem::path draft_variant_path(const std::filesystem::path& path, DraftInputMode mode);

// Short name used by flags and file names: shifted, unshifted, token, feature.
std::string draft_input_short_name(DraftInputMode mode);

}  // namespace EAGLET_ABI
}  // namespace eaglet
