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
#include <span>
#include <vector>

#include "eaglet/real.hpp"
#include "eaglet/tensor.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

class AttentionMask;

// 2-D [M,K]x[K,N] or batched 3-D [B,M,K]x[B,K,N].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
// [..., N] + bias[N]
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, real factor);
Tensor silu(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Softmax along the last axis of exp((x - max) / T). T == 0 yields the
// one-hot argmax with lowest-index ties and carries no gradient.
Tensor softmax(const Tensor& logits, real temperature = 1.0f);

// x * weight / sqrt(mean(x^2) + eps) along the last axis.
Tensor rmsnorm(const Tensor& x, const Tensor& weight, real eps);

// Mean over elements of the Huber-style loss with transition point 1.
Tensor smooth_l1(const Tensor& pred, const Tensor& target);

// Mean over rows of -sum(target * log_softmax(logits)). `target_dist` is
// treated as a constant.
Tensor soft_cross_entropy(const Tensor& target_dist, const Tensor& logits);

// Mean over rows of -log_softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets);

// Gathers rows of `table` [V, H] -> [L, H].
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);

// Concatenates two [L, A] and [L, B] tensors into [L, A + B].
Tensor concat_columns(const Tensor& a, const Tensor& b);

// Rows [begin, end) of a 2-D tensor.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

// Rotary embedding over [L, H] with per-row positions. Tables are
// [max_positions, head_dim / 2].
Tensor rope(const Tensor& x, std::span<const std::int64_t> positions, std::size_t heads,
            std::span<const real> cos_table, std::span<const real> sin_table);

// Multi-head attention of q [L, H] over k, v [S, H] restricted by mask [L, S].
Tensor masked_attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionMask& mask,
                        std::size_t heads);

}  // namespace EAGLET_ABI
}  // namespace eaglet
