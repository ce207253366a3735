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
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "eaglet/attention_mask.hpp"
#include "eaglet/kv_cache.hpp"
#include "eaglet/real.hpp"
#include "eaglet/rng.hpp"
#include "eaglet/tensor.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

using TokenId = std::int32_t;

struct ModelConfig {
  std::size_t vocab_size = 256;
  std::size_t hidden_dim = 128;
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 344;
  std::size_t max_positions = 512;
  std::uint64_t seed = 1;
  real norm_eps = 1e-5f;
  real rope_theta = 10000.0f;

  std::size_t head_dim() const { return hidden_dim / num_heads; }
  // Throws ValidationError on inconsistent sizes.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// cos/sin tables of shape [max_positions, head_dim / 2].
struct RotaryTable {
  RotaryTable(std::size_t max_positions, std::size_t head_dim, real theta);
  std::size_t max_positions;
  std::vector<real> cos;
  std::vector<real> sin;
};

// One pre-norm decoder block: attention and SwiGLU FFN with residuals.
struct BlockWeights {
  Tensor attn_norm;  // [H]
  Tensor wq, wk, wv, wo;  // [H, H]
  Tensor ffn_norm;  // [H]
  Tensor w_gate, w_up;  // [H, F]
  Tensor w_down;  // [F, H]

  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
};

BlockWeights init_block(std::size_t hidden, std::size_t ffn, std::size_t num_layers_for_scale, Rng& rng);

struct TransformerWeights {
  ModelConfig config;
  Tensor embedding;  // [V, H]
  std::vector<BlockWeights> layers;
  Tensor final_norm;  // [H]
  Tensor lm_head;  // [H, V]
  std::shared_ptr<const RotaryTable> rotary;

  std::vector<std::pair<std::string, Tensor>> named() const;
  std::vector<Tensor> parameters() const;
  void set_requires_grad(bool value) const;
};

// Seeded scaled-normal initialization; bit-identical for equal seeds.
TransformerWeights init_target(const ModelConfig& config);

// Runs one pre-norm block. With a cache the keys/values are written into the
// slots reserved for this call and attention reads the whole cache; without
// one the mask must be [L, L]. The cached path records no gradients.
Tensor block_forward(const BlockWeights& block, const Tensor& x, std::span<const std::int64_t> positions,
                     const AttentionMask& mask, const RotaryTable& rotary, std::size_t heads, real eps,
                     KVCache* cache, std::size_t layer, std::size_t first_slot);

struct ForwardResult {
  Tensor features;  // [L, H], post final norm
  Tensor logits;  // [L, V]
};

// Full target forward. `mask` is [L, occupancy + L] when a cache is given and
// [L, L] otherwise. Appends this call's keys/values to the cache.
ForwardResult forward(const TransformerWeights& weights, std::span<const TokenId> tokens,
                      std::span<const std::int64_t> positions, const AttentionMask& mask, KVCache* cache);

Tensor lm_head(const TransformerWeights& weights, const Tensor& features);

KVCache make_cache(const TransformerWeights& weights);

// Probability-preserving inflation: appends `extra_layers` blocks whose output
// projections are zero and pads every FFN to `ffn_dim` with zero down-rows.
// Features and logits are bit-identical to the source model while the compute
// and weight traffic per token grow.
TransformerWeights inflate_inert(const TransformerWeights& source, std::size_t extra_layers,
                                 std::size_t ffn_dim, std::uint64_t seed);

// FNV-1a over tensor names, shapes and payloads.
std::uint64_t weights_hash(const std::vector<std::pair<std::string, Tensor>>& named);
std::string hash_hex(std::uint64_t hash);

// Draws a token from `dist` adjusted to `temperature` (dist^(1/T), renormalized).
// T == 0 returns the argmax with lowest-index ties and consumes no variate;
// otherwise exactly one uniform variate is consumed.
TokenId sample_token(std::span<const real> dist, real temperature, Rng& rng);

// Inverse-CDF lookup of a uniform variate u in [0, 1) over a distribution.
TokenId sample_from_variate(std::span<const real> dist, double u);

// Lowest index of the maximum.
TokenId argmax(std::span<const real> values);

// Throws ValidationError unless entries are non-negative and sum to 1 within tol.
void validate_distribution(std::span<const real> dist, double tol = 1e-4);

}  // namespace EAGLET_ABI
}  // namespace eaglet
