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
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eaglet/attention_mask.hpp"
#include "eaglet/kv_cache.hpp"
#include "eaglet/model.hpp"
#include "eaglet/real.hpp"
#include "eaglet/tensor.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

enum class DraftInputMode {
  kFeatureShiftedToken,  // (f_k, t_{k+1}), the EAGLE input
  kFeatureUnshiftedToken,  // (f_k, t_k)
  kTokenOnly,  // t_{k+1}
  kFeatureOnly,  // f_k
};

std::string draft_input_mode_name(DraftInputMode mode);
// Accepts the long names and the short CLI forms shifted, unshifted, token
// and feature.
DraftInputMode parse_draft_input_mode(const std::string& text);
bool mode_uses_features(DraftInputMode mode);
bool mode_uses_tokens(DraftInputMode mode);

// Token paired with feature k, given the committed stream t_0..t_{k+1}.
TokenId paired_token(DraftInputMode mode, std::span<const TokenId> tokens, std::size_t k);

// FC + one decoder layer. The embedding and LM head are frozen copies of the
// target's, excluded from the trainable parameter list.
struct DraftHeadWeights {
  DraftInputMode mode = DraftInputMode::kFeatureShiftedToken;
  ModelConfig target_config;
  std::string target_hash;
  Tensor fc;  // [2H, H]; undefined when the mode feeds width H directly
  Tensor fc_bias;  // [H]
  BlockWeights block;
  Tensor embedding;  // frozen [V, H]
  Tensor lm_head;  // frozen [H, V]
  std::shared_ptr<const RotaryTable> rotary;

  bool has_fc() const { return fc.defined(); }
  // Trainable tensors only.
  std::vector<std::pair<std::string, Tensor>> named() const;
  std::vector<Tensor> parameters() const;
  void set_requires_grad(bool value) const;
};

DraftHeadWeights init_draft_head(const TransformerWeights& target, DraftInputMode mode, std::uint64_t seed);

// Builds the decoder-layer input for paired streams: features [L, H] and the
// tokens already aligned with them (the caller picks shifted or unshifted).
// Streams a mode does not use may be left empty; a missing required stream
// raises UsageError.
Tensor ablation_input_builder(const DraftHeadWeights& head, const Tensor& features,
                              std::span<const TokenId> tokens);

// Predicted next features, one per input position. With a cache, keys and
// values are appended and `mask` spans [L, occupancy + L].
Tensor draft_forward(const DraftHeadWeights& head, const Tensor& features, std::span<const TokenId> tokens,
                     std::span<const std::int64_t> positions, const AttentionMask& mask, KVCache* cache);

Tensor draft_logits(const DraftHeadWeights& head, const Tensor& predicted_features);
// softmax(LM head x feature) at `temperature`.
Tensor predict_distribution(const DraftHeadWeights& head, const Tensor& predicted_features, real temperature);

KVCache make_draft_cache(const DraftHeadWeights& head);

// True when the frozen copies are bit-identical to the target's tensors.
bool frozen_tensors_match(const DraftHeadWeights& head, const TransformerWeights& target);

void save_draft_head(const std::filesystem::path& path, const DraftHeadWeights& head);
// Rejects checkpoints trained against a different target.
DraftHeadWeights load_draft_head(const std::filesystem::path& path, const TransformerWeights& target);

}  // namespace EAGLET_ABI
}  // namespace eaglet
