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
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "eaglet/model.hpp"
#include "eaglet/rng.hpp"

namespace eaglet::testing {

inline ModelConfig tiny_config(std::uint64_t seed = 3) {
  ModelConfig c;
  c.vocab_size = 32;
  c.hidden_dim = 32;
  c.num_layers = 2;
  c.num_heads = 4;
  c.ffn_dim = 48;
  c.max_positions = 128;
  c.seed = seed;
  return c;
}

inline std::shared_ptr<const TransformerWeights> tiny_target(std::uint64_t seed = 3) {
  return std::make_shared<const TransformerWeights>(init_target(tiny_config(seed)));
}

inline std::vector<TokenId> random_tokens(std::size_t n, std::size_t vocab, Rng& rng) {
  std::vector<TokenId> out(n);
  for (TokenId& t : out) t = static_cast<TokenId>(rng.below(vocab));
  return out;
}

inline std::vector<std::int64_t> iota_positions(std::size_t n, std::int64_t start = 0) {
  std::vector<std::int64_t> out(n);
  std::iota(out.begin(), out.end(), start);
  return out;
}

inline std::span<const real> row(const Tensor& t, std::size_t r) {
  const std::size_t w = t.dim(1);
  return t.data().subspan(r * w, w);
}

}  // namespace eaglet::testing
