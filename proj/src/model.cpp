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

#include "eaglet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <sstream>

#include "eaglet/errors.hpp"
#include "eaglet/kernels.hpp"
#include "eaglet/ops.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("model config: " + what); };
  if (vocab_size == 0 || hidden_dim == 0 || num_layers == 0 || num_heads == 0 || ffn_dim == 0 ||
      max_positions == 0) {
    fail("all sizes must be positive");
  }
  if (hidden_dim % num_heads != 0) fail("hidden_dim must be divisible by num_heads");
  if (head_dim() % 2 != 0) fail("head_dim must be even for rotary embedding");
  if (!(norm_eps > 0.0f)) fail("norm_eps must be positive");
}

RotaryTable::RotaryTable(std::size_t max_pos, std::size_t head_dim, real theta)
    : max_positions(max_pos), cos(max_pos * (head_dim / 2)), sin(max_pos * (head_dim / 2)) {
  const std::size_t half = head_dim / 2;
  for (std::size_t pos = 0; pos < max_pos; ++pos) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::pow(static_cast<double>(theta), -2.0 * static_cast<double>(i) /
                                                                   static_cast<double>(head_dim));
      const double angle = static_cast<double>(pos) * freq;
      cos[pos * half + i] = static_cast<real>(std::cos(angle));
      sin[pos * half + i] = static_cast<real>(std::sin(angle));
    }
  }
}

namespace {

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  std::vector<real> data(shape_numel(shape));
  for (real& v : data) v = static_cast<real>(rng.normal() * stddev);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> BlockWeights::named(const std::string& prefix) const {
  return {{prefix + "attn_norm", attn_norm}, {prefix + "wq", wq},       {prefix + "wk", wk},
          {prefix + "wv", wv},               {prefix + "wo", wo},       {prefix + "ffn_norm", ffn_norm},
          {prefix + "w_gate", w_gate},       {prefix + "w_up", w_up},   {prefix + "w_down", w_down}};
}

BlockWeights init_block(std::size_t hidden, std::size_t ffn, std::size_t num_layers_for_scale, Rng& rng) {
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  const double out_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(num_layers_for_scale));
  BlockWeights b;
  b.attn_norm = Tensor::full({hidden}, 1.0f);
  b.wq = normal_tensor({hidden, hidden}, in_scale, rng);
  b.wk = normal_tensor({hidden, hidden}, in_scale, rng);
  b.wv = normal_tensor({hidden, hidden}, in_scale, rng);
  b.wo = normal_tensor({hidden, hidden}, in_scale * out_scale, rng);
  b.ffn_norm = Tensor::full({hidden}, 1.0f);
  b.w_gate = normal_tensor({hidden, ffn}, in_scale, rng);
  b.w_up = normal_tensor({hidden, ffn}, in_scale, rng);
  b.w_down = normal_tensor({ffn, hidden}, out_scale / std::sqrt(static_cast<double>(ffn)), rng);
  return b;
}

std::vector<std::pair<std::string, Tensor>> TransformerWeights::named() const {
  std::vector<std::pair<std::string, Tensor>> out{{"embedding", embedding}};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto block = layers[l].named("layers." + std::to_string(l) + ".");
    out.insert(out.end(), block.begin(), block.end());
  }
  out.emplace_back("final_norm", final_norm);
  out.emplace_back("lm_head", lm_head);
  return out;
}

std::vector<Tensor> TransformerWeights::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named()) out.push_back(t);
  return out;
}

void TransformerWeights::set_requires_grad(bool value) const {
  for (Tensor t : parameters()) t.set_requires_grad(value);
}

TransformerWeights init_target(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  TransformerWeights w;
  w.config = config;
  const std::size_t h = config.hidden_dim;
  w.embedding = normal_tensor({config.vocab_size, h}, 1.0, rng);
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    w.layers.push_back(init_block(h, config.ffn_dim, config.num_layers, rng));
  }
  w.final_norm = Tensor::full({h}, 1.0f);
  w.lm_head = normal_tensor({h, config.vocab_size}, 1.0 / std::sqrt(static_cast<double>(h)), rng);
  w.rotary = std::make_shared<RotaryTable>(config.max_positions, config.head_dim(), config.rope_theta);
  return w;
}

Tensor block_forward(const BlockWeights& block, const Tensor& x, std::span<const std::int64_t> positions,
                     const AttentionMask& mask, const RotaryTable& rotary, std::size_t heads, real eps,
                     KVCache* cache, std::size_t layer, std::size_t first_slot) {
  const std::size_t rows = x.dim(0);
  const std::size_t hidden = x.dim(1);
  Tensor h = rmsnorm(x, block.attn_norm, eps);
  Tensor q = rope(matmul(h, block.wq), positions, heads, rotary.cos, rotary.sin);
  Tensor k = rope(matmul(h, block.wk), positions, heads, rotary.cos, rotary.sin);
  Tensor v = matmul(h, block.wv);

  Tensor attn;
  if (cache) {
    if (grad_enabled() && (q.requires_grad() || k.requires_grad() || v.requires_grad())) {
      throw UsageError("cached forward does not record gradients; use NoGradGuard");
    }
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(k.data().data() + i * hidden, hidden, cache->keys(layer, first_slot + i));
      std::copy_n(v.data().data() + i * hidden, hidden, cache->values(layer, first_slot + i));
    }
    std::vector<real> out(rows * hidden);
    kernels::attention(rows, cache->occupancy(), hidden, heads, q.data().data(), cache->keys(layer, 0),
                       cache->values(layer, 0), hidden, mask.data(), out.data(), nullptr);
    attn = Tensor({rows, hidden}, std::move(out));
  } else {
    attn = masked_attention(q, k, v, mask, heads);
  }
  Tensor resid = add(x, matmul(attn, block.wo));
  Tensor h2 = rmsnorm(resid, block.ffn_norm, eps);
  Tensor gated = mul(silu(matmul(h2, block.w_gate)), matmul(h2, block.w_up));
  return add(resid, matmul(gated, block.w_down));
}

ForwardResult forward(const TransformerWeights& weights, std::span<const TokenId> tokens,
                      std::span<const std::int64_t> positions, const AttentionMask& mask, KVCache* cache) {
  const ModelConfig& cfg = weights.config;
  const std::size_t rows = tokens.size();
  if (rows == 0) throw DimensionError("forward: empty token list");
  if (positions.size() != rows) {
    throw DimensionError("forward: " + std::to_string(positions.size()) + " positions for " +
                         std::to_string(rows) + " tokens");
  }
  for (std::int64_t p : positions) {
    if (p < 0 || static_cast<std::size_t>(p) >= cfg.max_positions) {
      throw CapacityError("forward: position " + std::to_string(p) + " outside [0, " +
                          std::to_string(cfg.max_positions) + ")");
    }
  }
  const std::size_t prior = cache ? cache->occupancy() : 0;
  if (mask.rows() != rows || mask.cols() != prior + rows) {
    throw DimensionError("forward: mask is " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                         ", expected " + std::to_string(rows) + "x" + std::to_string(prior + rows));
  }
  mask.check_self_attention(prior);
  const std::size_t first_slot = cache ? cache->reserve(positions) : 0;

  Tensor x = embedding(weights.embedding, tokens);
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    x = block_forward(weights.layers[l], x, positions, mask, *weights.rotary, cfg.num_heads, cfg.norm_eps,
                      cache, l, first_slot);
  }
  ForwardResult result;
  result.features = rmsnorm(x, weights.final_norm, cfg.norm_eps);
  result.logits = matmul(result.features, weights.lm_head);
  return result;
}

Tensor lm_head(const TransformerWeights& weights, const Tensor& features) {
  if (features.rank() != 2 || features.dim(1) != weights.config.hidden_dim) {
    throw DimensionError("lm_head: features " + shape_str(features.shape()) + " do not have width " +
                         std::to_string(weights.config.hidden_dim));
  }
  return matmul(features, weights.lm_head);
}

KVCache make_cache(const TransformerWeights& weights) {
  return KVCache(weights.layers.size(), weights.config.hidden_dim, weights.config.max_positions);
}

TransformerWeights inflate_inert(const TransformerWeights& source, std::size_t extra_layers,
                                 std::size_t ffn_dim, std::uint64_t seed) {
  const std::size_t h = source.config.hidden_dim;
  const std::size_t old_ffn = source.config.ffn_dim;
  if (ffn_dim < old_ffn) throw UsageError("inflate_inert: ffn_dim cannot shrink");
  Rng rng(seed);
  TransformerWeights out;
  out.config = source.config;
  out.config.ffn_dim = ffn_dim;
  out.config.num_layers = source.config.num_layers + extra_layers;
  out.embedding = source.embedding.detach();
  out.final_norm = source.final_norm.detach();
  out.lm_head = source.lm_head.detach();
  out.rotary = source.rotary;

  auto pad_columns = [&](const Tensor& w) {
    std::vector<real> data(h * ffn_dim);
    for (std::size_t r = 0; r < h; ++r) {
      std::copy_n(w.data().data() + r * old_ffn, old_ffn, data.data() + r * ffn_dim);
      for (std::size_t c = old_ffn; c < ffn_dim; ++c) {
        data[r * ffn_dim + c] = static_cast<real>(rng.normal() / std::sqrt(static_cast<double>(h)));
      }
    }
    return Tensor({h, ffn_dim}, std::move(data));
  };
  for (const BlockWeights& b : source.layers) {
    BlockWeights nb = b;
    nb.attn_norm = b.attn_norm.detach();
    nb.wq = b.wq.detach();
    nb.wk = b.wk.detach();
    nb.wv = b.wv.detach();
    nb.wo = b.wo.detach();
    nb.ffn_norm = b.ffn_norm.detach();
    nb.w_gate = pad_columns(b.w_gate);
    nb.w_up = pad_columns(b.w_up);
    std::vector<real> down(ffn_dim * h, 0.0f);
    std::copy_n(b.w_down.data().data(), old_ffn * h, down.data());
    nb.w_down = Tensor({ffn_dim, h}, std::move(down));
    out.layers.push_back(std::move(nb));
  }
  for (std::size_t l = 0; l < extra_layers; ++l) {
    BlockWeights nb = init_block(h, ffn_dim, out.config.num_layers, rng);
    nb.wo = Tensor::zeros({h, h});
    nb.w_down = Tensor::zeros({ffn_dim, h});
    out.layers.push_back(std::move(nb));
  }
  return out;
}

std::uint64_t weights_hash(const std::vector<std::pair<std::string, Tensor>>& named) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto mix = [&hash](const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      hash ^= p[i];
      hash *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, t] : named) {
    mix(name.data(), name.size());
    for (std::size_t d : t.shape()) {
      const std::uint64_t d64 = d;
      mix(&d64, sizeof(d64));
    }
    mix(t.data().data(), t.numel() * sizeof(real));
  }
  return hash;
}

std::string hash_hex(std::uint64_t hash) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << hash;
  return out.str();
}

TokenId argmax(std::span<const real> values) {
  if (values.empty()) throw DimensionError("argmax of empty span");
  return static_cast<TokenId>(std::max_element(values.begin(), values.end()) - values.begin());
}

void validate_distribution(std::span<const real> dist, double tol) {
  if (dist.empty()) throw ValidationError("empty distribution");
  double total = 0.0;
  for (real p : dist) {
    if (!(p >= 0.0f) || !std::isfinite(p)) throw ValidationError("distribution has a negative or non-finite entry");
    total += p;
  }
  if (std::abs(total - 1.0) > tol) {
    throw ValidationError("distribution sums to " + std::to_string(total));
  }
}

TokenId sample_from_variate(std::span<const real> dist, double u) {
  double total = 0.0;
  for (real p : dist) total += p;
  const double threshold = u * total;
  double cumulative = 0.0;
  TokenId last_positive = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0f) continue;
    cumulative += dist[i];
    last_positive = static_cast<TokenId>(i);
    if (cumulative > threshold) return static_cast<TokenId>(i);
  }
  return last_positive;
}

TokenId sample_token(std::span<const real> dist, real temperature, Rng& rng) {
  validate_distribution(dist);
  if (temperature < 0.0f) throw UsageError("sample_token: temperature must be >= 0");
  if (temperature == 0.0f) return argmax(dist);
  if (temperature == 1.0f) return sample_from_variate(dist, rng.uniform());
  std::vector<real> adjusted(dist.size());
  const double inv_t = 1.0 / temperature;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    adjusted[i] = dist[i] > 0.0f ? static_cast<real>(std::pow(static_cast<double>(dist[i]), inv_t)) : 0.0f;
  }
  return sample_from_variate(adjusted, rng.uniform());
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
