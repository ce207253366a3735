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

#include "eaglet/draft_head.hpp"

#include <algorithm>
#include <cmath>

#include "eaglet/checkpoint.hpp"
#include "eaglet/errors.hpp"
#include "eaglet/ops.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

std::string draft_input_mode_name(DraftInputMode mode) {
  switch (mode) {
    case DraftInputMode::kFeatureShiftedToken:
      return "feature_and_shifted_token";
    case DraftInputMode::kFeatureUnshiftedToken:
      return "feature_and_unshifted_token";
    case DraftInputMode::kTokenOnly:
      return "token_only";
    case DraftInputMode::kFeatureOnly:
      return "feature_only";
  }
  throw UsageError("unknown draft input mode");
}

DraftInputMode parse_draft_input_mode(const std::string& text) {
  if (text == "shifted" || text == "feature_and_shifted_token") return DraftInputMode::kFeatureShiftedToken;
  if (text == "unshifted" || text == "feature_and_unshifted_token") return DraftInputMode::kFeatureUnshiftedToken;
  if (text == "token" || text == "token_only") return DraftInputMode::kTokenOnly;
  if (text == "feature" || text == "feature_only") return DraftInputMode::kFeatureOnly;
  throw ValidationError("unknown draft input mode \"" + text + "\" (expected shifted, unshifted, token or feature)");
}

bool mode_uses_features(DraftInputMode mode) { return mode != DraftInputMode::kTokenOnly; }
bool mode_uses_tokens(DraftInputMode mode) { return mode != DraftInputMode::kFeatureOnly; }

TokenId paired_token(DraftInputMode mode, std::span<const TokenId> tokens, std::size_t k) {
  const std::size_t index = mode == DraftInputMode::kFeatureUnshiftedToken ? k : k + 1;
  if (index >= tokens.size()) throw UsageError("paired_token: token stream too short");
  return tokens[index];
}

std::vector<std::pair<std::string, Tensor>> DraftHeadWeights::named() const {
  std::vector<std::pair<std::string, Tensor>> out;
  if (has_fc()) {
    out.emplace_back("fc", fc);
    out.emplace_back("fc_bias", fc_bias);
  }
  auto b = block.named("block.");
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<Tensor> DraftHeadWeights::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

void DraftHeadWeights::set_requires_grad(bool value) const {
  for (Tensor t : parameters()) t.set_requires_grad(value);
}

DraftHeadWeights init_draft_head(const TransformerWeights& target, DraftInputMode mode, std::uint64_t seed) {
  const ModelConfig& cfg = target.config;
  const std::size_t h = cfg.hidden_dim;
  Rng rng(seed);
  DraftHeadWeights head;
  head.mode = mode;
  head.target_config = cfg;
  head.target_hash = hash_hex(weights_hash(target.named()));
  if (mode == DraftInputMode::kFeatureShiftedToken || mode == DraftInputMode::kFeatureUnshiftedToken) {
    std::vector<real> fc(2 * h * h);
    const double stddev = 1.0 / std::sqrt(2.0 * static_cast<double>(h));
    for (real& v : fc) v = static_cast<real>(rng.normal() * stddev);
    head.fc = Tensor({2 * h, h}, std::move(fc));
    head.fc_bias = Tensor::zeros({h});
  }
  head.block = init_block(h, cfg.ffn_dim, 1, rng);
  head.embedding = target.embedding.detach();
  head.lm_head = target.lm_head.detach();
  head.rotary = target.rotary;
  return head;
}

Tensor ablation_input_builder(const DraftHeadWeights& head, const Tensor& features,
                              std::span<const TokenId> tokens) {
  const std::size_t h = head.target_config.hidden_dim;
  const bool need_f = mode_uses_features(head.mode);
  const bool need_t = mode_uses_tokens(head.mode);
  if (need_f && !features.defined()) {
    throw UsageError("draft input mode " + draft_input_mode_name(head.mode) + " needs a feature stream");
  }
  if (need_t && tokens.empty()) {
    throw UsageError("draft input mode " + draft_input_mode_name(head.mode) + " needs a token stream");
  }
  if (need_f && (features.rank() != 2 || features.dim(1) != h)) {
    throw DimensionError("draft features " + shape_str(features.shape()) + " do not have width " +
                         std::to_string(h));
  }
  if (need_f && need_t && features.dim(0) != tokens.size()) {
    throw UsageError("draft streams differ in length: " + std::to_string(features.dim(0)) + " features, " +
                     std::to_string(tokens.size()) + " tokens");
  }
  if (!need_t) return features;
  Tensor e = embedding(head.embedding, tokens);
  if (!need_f) return e;
  return add_bias(matmul(concat_columns(features, e), head.fc), head.fc_bias);
}

Tensor draft_forward(const DraftHeadWeights& head, const Tensor& features, std::span<const TokenId> tokens,
                     std::span<const std::int64_t> positions, const AttentionMask& mask, KVCache* cache) {
  const ModelConfig& cfg = head.target_config;
  Tensor x = ablation_input_builder(head, features, tokens);
  const std::size_t rows = x.dim(0);
  if (positions.size() != rows) {
    throw DimensionError("draft_forward: " + std::to_string(positions.size()) + " positions for " +
                         std::to_string(rows) + " inputs");
  }
  for (std::int64_t p : positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= cfg.max_positions) {
      throw CapacityError("draft_forward: position " + std::to_string(p) + " outside [0, " +
                          std::to_string(cfg.max_positions) + ")");
    }
  }
  const std::size_t prior = cache ? cache->occupancy() : 0;
  if (mask.rows() != rows || mask.cols() != prior + rows) {
    throw DimensionError("draft_forward: mask is " + std::to_string(mask.rows()) + "x" +
                         std::to_string(mask.cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(prior + rows));
  }
  mask.check_self_attention(prior);
  const std::size_t first_slot = cache ? cache->reserve(positions) : 0;
  return block_forward(head.block, x, positions, mask, *head.rotary, cfg.num_heads, cfg.norm_eps, cache, 0,
                       first_slot);
}

Tensor draft_logits(const DraftHeadWeights& head, const Tensor& predicted_features) {
  if (predicted_features.rank() != 2 || predicted_features.dim(1) != head.target_config.hidden_dim) {
    throw DimensionError("draft features " + shape_str(predicted_features.shape()) + " do not have width " +
                         std::to_string(head.target_config.hidden_dim));
  }
  return matmul(predicted_features, head.lm_head);
}

Tensor predict_distribution(const DraftHeadWeights& head, const Tensor& predicted_features, real temperature) {
  return softmax(draft_logits(head, predicted_features), temperature);
}

KVCache make_draft_cache(const DraftHeadWeights& head) {
  return KVCache(1, head.target_config.hidden_dim, head.target_config.max_positions);
}

bool frozen_tensors_match(const DraftHeadWeights& head, const TransformerWeights& target) {
  auto same = [](const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
  };
  return same(head.embedding, target.embedding) && same(head.lm_head, target.lm_head);
}

void save_draft_head(const std::filesystem::path& path, const DraftHeadWeights& head) {
  nlohmann::json meta = {{"kind", "draft_head"},
                         {"draft_input_mode", draft_input_mode_name(head.mode)},
                         {"target_hash", head.target_hash},
                         {"config", model_config_to_json(head.target_config)}};
  save_checkpoint(path, meta, head.named());
}

DraftHeadWeights load_draft_head(const std::filesystem::path& path, const TransformerWeights& target) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "draft_head") {
    throw ValidationError(path.string() + " is not a draft-head checkpoint");
  }
  const std::string want_hash = hash_hex(weights_hash(target.named()));
  if (ckpt.meta.value("target_hash", "") != want_hash) {
    throw ValidationError(path.string() + " was trained against target " + ckpt.meta.value("target_hash", "?") +
                          ", loaded target is " + want_hash);
  }
  DraftHeadWeights head =
      init_draft_head(target, parse_draft_input_mode(ckpt.meta.at("draft_input_mode").get<std::string>()), 0);
  auto named = head.named();
  if (named.size() != ckpt.tensors.size()) {
    throw ValidationError("draft checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, expected " +
                          std::to_string(named.size()));
  }
  for (auto& [name, t] : named) {
    const Tensor& src = ckpt.get(name);
    if (src.shape() != t.shape()) throw ValidationError("tensor " + name + " has the wrong shape");
    std::copy(src.data().begin(), src.data().end(), t.mutable_data().begin());
  }
  return head;
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
