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

#include <gtest/gtest.h>

#include <vector>

#include "eaglet/ops.hpp"
#include "eaglet/optim.hpp"
#include "eaglet/rng.hpp"
#include "eaglet/tensor.hpp"

namespace eaglet {
namespace {

static_assert(sizeof(real) == 8);

Tensor random_tensor(Shape shape, Rng& rng, double scale, bool requires_grad = false) {
  std::vector<real> data(shape_numel(shape));
  for (real& v : data) v = static_cast<real>(rng.normal() * scale);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

// Random compositions of matmul, rmsnorm, softmax and the two losses.
TEST(ComposedGradientTest, MatchesCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    Rng rng(100 + seed);
    const std::size_t rows = 2 + rng.below(3);
    const std::size_t width = 3 + rng.below(4);
    Tensor x = random_tensor({rows, width}, rng, 1.0, true);
    Tensor w1 = random_tensor({width, width}, rng, 0.5, true);
    Tensor g = random_tensor({width}, rng, 0.5, true);
    Tensor w2 = random_tensor({width, 5}, rng, 0.5, true);
    Tensor w3 = random_tensor({5, width}, rng, 0.5, true);
    Tensor target = random_tensor({rows, width}, rng, 1.0);
    Tensor dist = softmax(random_tensor({rows, 5}, rng, 1.0));
    const int variant = static_cast<int>(seed % 3);
    auto fn = [&]() -> Tensor {
      Tensor h = rmsnorm(matmul(x, w1), g, 1e-5f);
      Tensor logits = matmul(h, w2);
      if (variant == 0) return add(smooth_l1(h, target), soft_cross_entropy(dist, logits));
      if (variant == 1) return sum(mul(softmax(logits, 0.7f), dist));
      return smooth_l1(matmul(softmax(logits), w3), target);
    };
    std::vector<Tensor> params{x, w1, g, w2, w3};
    EXPECT_LT(gradient_check(fn, params, {.epsilon = 1e-3f}), 1e-3) << "seed " << seed;
  }
}

}  // namespace
}  // namespace eaglet
