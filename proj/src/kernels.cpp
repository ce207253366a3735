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

#include "eaglet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#if defined(__FMA__)
#include <immintrin.h>
#endif
#include <limits>
#include <vector>

namespace eaglet {
inline namespace EAGLET_ABI {
namespace kernels {

namespace {

constexpr std::size_t kMaxRows = 6;
using Vec = real __attribute__((vector_size(32)));
constexpr std::size_t kLanes = sizeof(Vec) / sizeof(real);
constexpr std::size_t kDepth = 16;
constexpr std::size_t kBlockBytes = 16384;

inline Vec load(const real* p) {
  Vec v;
  std::memcpy(&v, p, sizeof(Vec));
  return v;
}

inline void store(real* p, Vec v) { std::memcpy(p, &v, sizeof(Vec)); }

// Fused multiply-add where the target has it. Every element of c takes the
// same path whatever the tile shape, so rows stay batch-invariant.
inline Vec madd(real a, Vec b, Vec c) {
#if defined(__FMA__)
  if constexpr (sizeof(real) == 4) {
    return reinterpret_cast<Vec>(_mm256_fmadd_ps(_mm256_set1_ps(a), reinterpret_cast<__m256>(b),
                                                 reinterpret_cast<__m256>(c)));
  } else {
    return reinterpret_cast<Vec>(_mm256_fmadd_pd(_mm256_set1_pd(a), reinterpret_cast<__m256d>(b),
                                                 reinterpret_cast<__m256d>(c)));
  }
#else
  return c + a * b;
#endif
}

inline real madd(real a, real b, real c) {
#if defined(__FMA__)
  return std::fma(a, b, c);
#else
  return c + a * b;
#endif
}

// Register tile of R rows by V vectors. Each c element accumulates over p in
// increasing order, as a plain loop would, so results do not depend on how
// rows and columns are grouped.
template <std::size_t R, std::size_t V>
void tile(std::size_t k, std::size_t n, const real* __restrict a, std::size_t lda, const real* __restrict b,
          real* __restrict c, bool accumulate) {
  Vec acc[R][V];
#pragma GCC unroll 8
  for (std::size_t i = 0; i < R; ++i) {
#pragma GCC unroll 8
    for (std::size_t v = 0; v < V; ++v) acc[i][v] = accumulate ? load(c + i * n + v * kLanes) : Vec{};
  }
  for (std::size_t p = 0; p < k; ++p) {
    Vec bv[V];
#pragma GCC unroll 8
    for (std::size_t v = 0; v < V; ++v) bv[v] = load(b + p * n + v * kLanes);
#pragma GCC unroll 8
    for (std::size_t i = 0; i < R; ++i) {
      const real av = a[i * lda + p];
#pragma GCC unroll 8
      for (std::size_t v = 0; v < V; ++v) acc[i][v] = madd(av, bv[v], acc[i][v]);
    }
  }
#pragma GCC unroll 8
  for (std::size_t i = 0; i < R; ++i) {
#pragma GCC unroll 8
    for (std::size_t v = 0; v < V; ++v) store(c + i * n + v * kLanes, acc[i][v]);
  }
}

// Few rows get wide tiles so enough independent sums are in flight. Blocks of
// at least kDepth rows of b are swept across all columns, which keeps the reads of b
// sequential; partial sums go back through c between blocks.
template <std::size_t R>
void row_group(std::size_t k, std::size_t n, const real* a, const real* b, real* c, bool accumulate) {
  constexpr std::size_t kWide = R <= 2 ? 8 : R <= 4 ? 6 : 4;
  const std::size_t vec_end = n - n % kLanes;
  if (k == 0) {
    if (!accumulate) std::fill(c, c + R * n, real(0));
    return;
  }
  const std::size_t block = std::max(kDepth, kBlockBytes / (n * sizeof(real)));
  for (std::size_t p0 = 0; p0 < k; p0 += block) {
    const std::size_t depth = std::min(block, k - p0);
    const bool acc = accumulate || p0 > 0;
    const real* bp = b + p0 * n;
    std::size_t j = 0;
    for (; j + kWide * kLanes <= n; j += kWide * kLanes) tile<R, kWide>(depth, n, a + p0, k, bp + j, c + j, acc);
    for (; j < vec_end; j += kLanes) tile<R, 1>(depth, n, a + p0, k, bp + j, c + j, acc);
  }
  for (std::size_t i = 0; i < R; ++i) {
    real* crow = c + i * n;
    if (!accumulate) std::fill(crow + vec_end, crow + n, real(0));
    for (std::size_t p = 0; p < k; ++p) {
      const real av = a[i * k + p];
      for (std::size_t jj = vec_end; jj < n; ++jj) crow[jj] = madd(av, b[p * n + jj], crow[jj]);
    }
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const real* __restrict a,
             const real* __restrict b, real* __restrict c, bool accumulate) {
  for (std::size_t i0 = 0; i0 < m; i0 += kMaxRows) {
    const real* ai = a + i0 * k;
    real* ci = c + i0 * n;
    switch (std::min(kMaxRows, m - i0)) {
      case 1: row_group<1>(k, n, ai, b, ci, accumulate); break;
      case 2: row_group<2>(k, n, ai, b, ci, accumulate); break;
      case 3: row_group<3>(k, n, ai, b, ci, accumulate); break;
      case 4: row_group<4>(k, n, ai, b, ci, accumulate); break;
      case 5: row_group<5>(k, n, ai, b, ci, accumulate); break;
      default: row_group<6>(k, n, ai, b, ci, accumulate); break;
    }
  }
}

void gemm_tn_acc(std::size_t m, std::size_t k, std::size_t n, const real* __restrict a,
                 const real* __restrict d, real* __restrict c) {
  for (std::size_t i = 0; i < m; ++i) {
    const real* __restrict drow = d + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const real av = a[i * k + p];
      if (av == 0.0f) continue;
      real* __restrict crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * drow[j];
    }
  }
}

void gemm_nt_acc(std::size_t m, std::size_t n, std::size_t k, const real* __restrict d,
                 const real* __restrict b, real* __restrict c) {
  // Transpose B once so the inner loop is a contiguous axpy.
  std::vector<real> bt(n * k);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  }
  gemm_nn(m, n, k, d, bt.data(), c, true);
}

void attention(std::size_t rows, std::size_t slots, std::size_t hidden, std::size_t heads,
               const real* q, const real* keys, const real* values, std::size_t kv_stride,
               const std::uint8_t* mask, real* out, real* probs) {
  const std::size_t head_dim = hidden / heads;
  const real scale = 1.0f / std::sqrt(static_cast<real>(head_dim));
  std::vector<std::size_t> allowed;
  allowed.reserve(slots);
  std::vector<real> weights(slots);
  if (probs) std::fill(probs, probs + rows * heads * slots, 0.0f);
  for (std::size_t i = 0; i < rows; ++i) {
    allowed.clear();
    const std::uint8_t* mrow = mask + i * slots;
    for (std::size_t s = 0; s < slots; ++s) {
      if (mrow[s]) allowed.push_back(s);
    }
    for (std::size_t h = 0; h < heads; ++h) {
      const real* qh = q + i * hidden + h * head_dim;
      real* oh = out + i * hidden + h * head_dim;
      std::fill(oh, oh + head_dim, 0.0f);
      if (allowed.empty()) continue;
      real max_score = -std::numeric_limits<real>::infinity();
      for (std::size_t a = 0; a < allowed.size(); ++a) {
        const real* kh = keys + allowed[a] * kv_stride + h * head_dim;
        real dot = 0.0f;
        for (std::size_t d = 0; d < head_dim; ++d) dot += qh[d] * kh[d];
        weights[a] = dot * scale;
        max_score = std::max(max_score, weights[a]);
      }
      real total = 0.0f;
      for (std::size_t a = 0; a < allowed.size(); ++a) {
        weights[a] = std::exp(weights[a] - max_score);
        total += weights[a];
      }
      const real inv = 1.0f / total;
      for (std::size_t a = 0; a < allowed.size(); ++a) {
        const real w = weights[a] * inv;
        const real* vh = values + allowed[a] * kv_stride + h * head_dim;
        for (std::size_t d = 0; d < head_dim; ++d) oh[d] += w * vh[d];
        if (probs) probs[(i * heads + h) * slots + allowed[a]] = w;
      }
    }
  }
}

void rope(std::size_t rows, std::size_t hidden, std::size_t heads, const std::int64_t* positions,
          const real* cos_table, const real* sin_table, real* x, bool inverse) {
  const std::size_t head_dim = hidden / heads;
  const std::size_t half = head_dim / 2;
  for (std::size_t i = 0; i < rows; ++i) {
    const real* cs = cos_table + static_cast<std::size_t>(positions[i]) * half;
    const real* sn = sin_table + static_cast<std::size_t>(positions[i]) * half;
    for (std::size_t h = 0; h < heads; ++h) {
      real* v = x + i * hidden + h * head_dim;
      for (std::size_t p = 0; p < half; ++p) {
        const real c = cs[p];
        const real s = inverse ? -sn[p] : sn[p];
        const real x0 = v[2 * p];
        const real x1 = v[2 * p + 1];
        v[2 * p] = x0 * c - x1 * s;
        v[2 * p + 1] = x0 * s + x1 * c;
      }
    }
  }
}

}  // namespace kernels
}  // namespace EAGLET_ABI
}  // namespace eaglet
