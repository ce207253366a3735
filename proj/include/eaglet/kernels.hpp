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

#include "eaglet/real.hpp"

// Raw scalar kernels shared by the autodiff ops and the cached inference
// path. Every output element is accumulated in a fixed order that does not
// depend on how many rows are processed together, so a row computed alone
// and the same row computed inside a batch are bit-identical.
namespace eaglet {
inline namespace EAGLET_ABI {
namespace kernels {

// C[M,N] = A[M,K] * B[K,N] (or += when accumulate).
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const real* a, const real* b, real* c,
             bool accumulate);

// C[K,N] += A[M,K]^T * D[M,N].
void gemm_tn_acc(std::size_t m, std::size_t k, std::size_t n, const real* a, const real* d,
                 real* c);

// C[M,K] += D[M,N] * B[K,N]^T.
void gemm_nt_acc(std::size_t m, std::size_t n, std::size_t k, const real* d, const real* b,
                 real* c);

// Multi-head scaled dot-product attention over an explicit boolean mask.
// q: [L, H] row-major; keys/values: [S, H] with the given row stride; mask:
// [L, S]. Keys are visited in slot order. When `probs` is non-null it
// receives [L, heads, S] attention weights (zero where masked).
void attention(std::size_t rows, std::size_t slots, std::size_t hidden, std::size_t heads,
               const real* q, const real* keys, const real* values, std::size_t kv_stride,
               const std::uint8_t* mask, real* out, real* probs);

// Rotary embedding applied in place to [L, H] with per-row positions.
void rope(std::size_t rows, std::size_t hidden, std::size_t heads, const std::int64_t* positions,
          const real* cos_table, const real* sin_table, real* x, bool inverse);

}  // namespace kernels
}  // namespace EAGLET_ABI
}  // namespace eaglet
