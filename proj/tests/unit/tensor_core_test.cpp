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

#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "eaglet/attention_mask.hpp"
#include "eaglet/errors.hpp"
#include "eaglet/ops.hpp"
#include "eaglet/optim.hpp"
#include "eaglet/rng.hpp"
#include "eaglet/tensor.hpp"

namespace eaglet {
namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, bool requires_grad = false) {
  std::vector<float> data(shape_numel(shape));
  for (float& v : data) v = static_cast<float>(rng.normal() * scale);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

std::vector<float> to_vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

TEST(TensorTest, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.dim(1), 3u);
}

TEST(TensorTest, CloneIsDeep) {
  Tensor a({2}, {1, 2});
  Tensor b = a.clone();
  b.mutable_data()[0] = 7;
  EXPECT_EQ(a.data()[0], 1.0f);
}

TEST(MatmulTest, IdentityIsNeutral) {
  Rng rng(1);
  Tensor m = random_tensor({3, 4}, rng);
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  EXPECT_EQ(to_vec(matmul(eye, m)), to_vec(m));
}

TEST(MatmulTest, HandProduct) {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 1}, {1, 1});
  EXPECT_EQ(to_vec(matmul(a, b)), (std::vector<float>{3, 7}));
}

TEST(MatmulTest, ZeroLeftOperand) {
  Rng rng(2);
  Tensor out = matmul(Tensor::zeros({2, 3}), random_tensor({3, 5}, rng));
  EXPECT_EQ(to_vec(out), std::vector<float>(10, 0.0f));
}

TEST(MatmulTest, BatchedMatchesPerBatch) {
  Rng rng(3);
  Tensor a = random_tensor({2, 3, 4}, rng);
  Tensor b = random_tensor({2, 4, 5}, rng);
  Tensor c = matmul(a, b);
  for (std::size_t batch = 0; batch < 2; ++batch) {
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 5; ++j) {
        double expect = 0;
        for (std::size_t k = 0; k < 4; ++k) {
          expect += a.data()[batch * 12 + i * 4 + k] * b.data()[batch * 20 + k * 5 + j];
        }
        EXPECT_NEAR(c.data()[batch * 15 + i * 5 + j], expect, 1e-5);
      }
    }
  }
}

TEST(MatmulTest, OddShapesMatchADoubleReference) {
  Rng rng(21);
  for (auto [m, k, n] : std::vector<std::array<std::size_t, 3>>{
           {1, 1, 1}, {3, 7, 5}, {7, 17, 9}, {13, 40, 100}, {6, 300, 71}, {1, 128, 300}, {9, 3, 8}}) {
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double ref = 0;
        for (std::size_t p = 0; p < k; ++p) ref += double(a.data()[i * k + p]) * b.data()[p * n + j];
        ASSERT_NEAR(c.data()[i * n + j], ref, 1e-4 * (1 + std::abs(ref))) << m << "x" << k << "x" << n;
      }
    }
  }
}

TEST(MatmulTest, RowsDoNotDependOnBatchSize) {
  Rng rng(22);
  for (std::size_t n : {5u, 64u, 130u}) {
    Tensor a = random_tensor({15, 37}, rng), b = random_tensor({37, n}, rng);
    const std::vector<float> full = to_vec(matmul(a, b));
    for (std::size_t rows = 1; rows <= 15; ++rows) {
      std::vector<float> head(a.data().begin(), a.data().begin() + rows * 37);
      const std::vector<float> part = to_vec(matmul(Tensor({rows, 37}, std::move(head)), b));
      for (std::size_t i = 0; i < part.size(); ++i) ASSERT_EQ(part[i], full[i]) << rows << " rows, n " << n;
    }
  }
}

TEST(MatmulTest, MismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("[2, 3]"), std::string::npos) << what;
    EXPECT_NE(what.find("[4, 2]"), std::string::npos) << what;
  }
}

TEST(SoftmaxTest, EqualLogitsGiveUniform) {
  Tensor p = softmax(Tensor({4}, {0.3f, 0.3f, 0.3f, 0.3f}));
  for (float v : p.data()) EXPECT_NEAR(v, 0.25f, 1e-7);
}

TEST(SoftmaxTest, ClosedForm) {
  Tensor p = softmax(Tensor({2}, {0.0f, static_cast<float>(std::log(2.0))}));
  EXPECT_NEAR(p.data()[0], 1.0 / 3.0, 1e-7);
  EXPECT_NEAR(p.data()[1], 2.0 / 3.0, 1e-7);
}

TEST(SoftmaxTest, ZeroTemperatureTieBreaksLow) {
  Tensor p = softmax(Tensor({3}, {0.3f, 0.7f, 0.7f}), 0.0f);
  EXPECT_EQ(to_vec(p), (std::vector<float>{0, 1, 0}));
}

TEST(SoftmaxTest, EmptyAxisThrows) {
  EXPECT_THROW(softmax(Tensor::zeros({2, 0})), DimensionError);
}

TEST(SoftmaxTest, RowsSumToOneAndTemperatureIsScaling) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor logits = random_tensor({3, 17}, rng, 4.0);
    const float temp = static_cast<float>(rng.uniform(0.2, 3.0));
    Tensor p = softmax(logits, temp);
    Tensor q = softmax(scale(logits, 1.0f / temp), 1.0f);
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 17; ++c) {
        total += p.data()[r * 17 + c];
        EXPECT_NEAR(p.data()[r * 17 + c], q.data()[r * 17 + c], 1e-6);
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(RmsnormTest, UnitFixedPoint) {
  Tensor out = rmsnorm(Tensor::full({5}, 1.0f), Tensor::full({5}, 1.0f), 1e-12f);
  for (float v : out.data()) EXPECT_NEAR(v, 1.0f, 1e-6);
}

TEST(RmsnormTest, HandComputation) {
  Tensor out = rmsnorm(Tensor({2}, {3, 4}), Tensor({2}, {1, 1}), 0.0f);
  EXPECT_NEAR(out.data()[0], 3.0 / std::sqrt(12.5), 1e-6);
  EXPECT_NEAR(out.data()[1], 4.0 / std::sqrt(12.5), 1e-6);
}

TEST(RmsnormTest, ZeroWeightAndMismatch) {
  Tensor out = rmsnorm(Tensor({2}, {3, 4}), Tensor::zeros({2}), 1e-5f);
  EXPECT_EQ(to_vec(out), (std::vector<float>{0, 0}));
  EXPECT_THROW(rmsnorm(Tensor({2}, {3, 4}), Tensor::zeros({3}), 1e-5f), DimensionError);
}

TEST(SmoothL1Test, Examples) {
  EXPECT_EQ(smooth_l1(Tensor({2}, {1, 2}), Tensor({2}, {1, 2})).item(), 0.0f);
  EXPECT_FLOAT_EQ(smooth_l1(Tensor({1}, {0.5f}), Tensor({1}, {0.0f})).item(), 0.125f);
  EXPECT_FLOAT_EQ(smooth_l1(Tensor({1}, {2.0f}), Tensor({1}, {0.0f})).item(), 1.5f);
  EXPECT_THROW(smooth_l1(Tensor({1}, {2.0f}), Tensor({2}, {0, 0})), DimensionError);
}

TEST(SoftCrossEntropyTest, ConfidentCorrectIsNearZero) {
  EXPECT_NEAR(soft_cross_entropy(Tensor({1, 2}, {1, 0}), Tensor({1, 2}, {10, -10})).item(), 0.0, 1e-8);
}

TEST(SoftCrossEntropyTest, UniformGivesLogV) {
  const std::size_t v = 7;
  Tensor target = Tensor::full({1, v}, 1.0f / v);
  Tensor logits = Tensor::full({1, v}, 0.25f);
  EXPECT_NEAR(soft_cross_entropy(target, logits).item(), std::log(7.0), 1e-6);
}

TEST(SoftCrossEntropyTest, EqualsEntropyAtMatch) {
  Rng rng(5);
  Tensor logits = random_tensor({2, 6}, rng, 2.0);
  Tensor p = softmax(logits);
  double entropy = 0;
  for (float v : p.data()) entropy -= v * std::log(static_cast<double>(v));
  EXPECT_NEAR(soft_cross_entropy(p, logits).item(), entropy / 2.0, 1e-6);
}

TEST(SoftCrossEntropyTest, RejectsUnnormalizedTarget) {
  EXPECT_THROW(soft_cross_entropy(Tensor({1, 2}, {0.6f, 0.6f}), Tensor({1, 2}, {0, 0})), ValidationError);
}

TEST(SoftCrossEntropyTest, GradientOnlyReachesLogits) {
  Tensor target({1, 2}, {0.25f, 0.75f}, true);
  Tensor logits({1, 2}, {0.1f, 0.2f}, true);
  backward(soft_cross_entropy(target, logits));
  EXPECT_FALSE(target.has_grad());
  Tensor p = softmax(logits.detach());
  EXPECT_NEAR(logits.grad()[0], p.data()[0] - 0.25f, 1e-6);
  EXPECT_NEAR(logits.grad()[1], p.data()[1] - 0.75f, 1e-6);
}

TEST(BackwardTest, SumGivesOnes) {
  Tensor w({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  backward(sum(w));
  EXPECT_EQ(std::vector<float>(w.grad().begin(), w.grad().end()), std::vector<float>(6, 1.0f));
}

TEST(BackwardTest, SquareGivesTwiceW) {
  Tensor w({2}, {1, 2}, true);
  backward(sum(mul(w, w)));
  EXPECT_EQ(std::vector<float>(w.grad().begin(), w.grad().end()), (std::vector<float>{2, 4}));
}

TEST(BackwardTest, OffPathParameterStaysZeroAndCallsAccumulate) {
  Tensor w({2}, {1, 2}, true);
  Tensor unused({2}, {5, 5}, true);
  backward(sum(w));
  backward(sum(w));
  EXPECT_EQ(w.grad()[0], 2.0f);
  EXPECT_EQ(unused.grad()[0], 0.0f);
  EXPECT_EQ(unused.grad()[1], 0.0f);
}

TEST(BackwardTest, NonScalarThrows) {
  Tensor w({2}, {1, 2}, true);
  EXPECT_THROW(backward(scale(w, 2.0f)), UsageError);
}

TEST(BackwardTest, NoGradGuardRecordsNothing) {
  Tensor w({2}, {1, 2}, true);
  Tensor out;
  {
    NoGradGuard guard;
    out = sum(w);
  }
  EXPECT_FALSE(out.requires_grad());
}

TEST(AdamWTest, ZeroGradZeroDecayIsIdentity) {
  Tensor w({3}, {1, -2, 3}, true);
  w.mutable_grad();
  std::vector<Tensor> params{w};
  OptimizerState state;
  adamw_step(params, state, {.lr = 1e-2f});
  EXPECT_EQ(to_vec(w), (std::vector<float>{1, -2, 3}));
  EXPECT_EQ(state.step, 1u);
}

TEST(AdamWTest, FirstStepMovesByLr) {
  Tensor w({1}, {0.0f}, true);
  w.mutable_grad()[0] = 1.0f;
  std::vector<Tensor> params{w};
  OptimizerState state;
  adamw_step(params, state, {.lr = 1e-3f, .beta1 = 0.9f, .beta2 = 0.95f});
  // m_hat = v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(w.data()[0], -1e-3 / (1.0 + 1e-8), 1e-10);
}

TEST(AdamWTest, DecoupledDecayShrinks) {
  Tensor w({2}, {2, -4}, true);
  w.mutable_grad();
  std::vector<Tensor> params{w};
  OptimizerState state;
  adamw_step(params, state, {.lr = 0.1f, .weight_decay = 0.5f});
  EXPECT_NEAR(w.data()[0], 2.0 * 0.95, 1e-6);
  EXPECT_NEAR(w.data()[1], -4.0 * 0.95, 1e-6);
}

TEST(AdamWTest, StepCounterAndMomentShapes) {
  Tensor a({2, 2}, {1, 2, 3, 4}, true);
  Tensor b({3}, {1, 2, 3}, true);
  std::vector<Tensor> params{a, b};
  OptimizerState state;
  for (int i = 1; i <= 3; ++i) {
    backward(add(sum(mul(a, a)), sum(b)));
    adamw_step(params, state, {.lr = 1e-2f});
    EXPECT_EQ(state.step, static_cast<std::uint64_t>(i));
  }
  ASSERT_EQ(state.first_moment.size(), 2u);
  EXPECT_EQ(state.first_moment[0].size(), 4u);
  EXPECT_EQ(state.second_moment[1].size(), 3u);
}

TEST(ClipTest, BelowThresholdUnchanged) {
  Tensor w({2}, {0, 0}, true);
  w.mutable_grad()[0] = 0.3f;
  std::vector<Tensor> params{w};
  EXPECT_NEAR(clip_grad_norm(params, 0.5f), 0.3, 1e-7);
  EXPECT_EQ(w.grad()[0], 0.3f);
}

TEST(ClipTest, ScalesToMaxNorm) {
  Tensor w({2}, {0, 0}, true);
  w.mutable_grad()[0] = 3.0f;
  w.mutable_grad()[1] = 4.0f;
  std::vector<Tensor> params{w};
  EXPECT_NEAR(clip_grad_norm(params, 0.5f), 5.0, 1e-7);
  EXPECT_NEAR(w.grad()[0], 0.3f, 1e-7);
  EXPECT_NEAR(w.grad()[1], 0.4f, 1e-7);
}

TEST(ClipTest, ZeroGradsAndIdempotence) {
  Tensor z({2}, {0, 0}, true);
  std::vector<Tensor> zero_params{z};
  clip_grad_norm(zero_params, 0.5f);
  EXPECT_EQ(z.grad()[0], 0.0f);

  Rng rng(6);
  Tensor a = random_tensor({4}, rng, 1.0, true);
  Tensor b = random_tensor({3}, rng, 1.0, true);
  for (float& g : a.mutable_grad()) g = static_cast<float>(rng.normal());
  for (float& g : b.mutable_grad()) g = static_cast<float>(rng.normal());
  std::vector<Tensor> params{a, b};
  clip_grad_norm(params, 0.5f);
  std::vector<float> once(a.grad().begin(), a.grad().end());
  clip_grad_norm(params, 0.5f);
  EXPECT_EQ(std::vector<float>(a.grad().begin(), a.grad().end()), once);
}

TEST(GradientCheckTest, QuadraticIsExact) {
  Tensor w({4}, {0.5f, -0.25f, 1.0f, 0.75f}, true);
  std::vector<Tensor> params{w};
  auto fn = [&] { return sum(mul(w, w)); };
  EXPECT_LT(gradient_check(fn, params, {.epsilon = 1.0f / 128}), 1e-6);
}

TEST(GradientCheckTest, ConstantFunctionHasZeroGradients) {
  Tensor w({3}, {1, 2, 3}, true);
  std::vector<Tensor> params{w};
  auto fn = [&] { return add(scale(sum(w), 0.0f), Tensor::scalar(4.0f)); };
  EXPECT_EQ(gradient_check(fn, params), 0.0);
  EXPECT_EQ(w.grad()[0], 0.0f);
}

TEST(GradientCheckTest, RejectsBadEpsilonAndNonScalar) {
  Tensor w({2}, {1, 2}, true);
  std::vector<Tensor> params{w};
  EXPECT_THROW(gradient_check([&] { return sum(w); }, params, {.epsilon = 0.5f}), UsageError);
  EXPECT_THROW(gradient_check([&] { return scale(w, 1.0f); }, params), UsageError);
}

TEST(DeterminismTest, OpsAreBitIdentical) {
  auto run = [] {
    Rng rng(9);
    Tensor a = random_tensor({5, 7}, rng, 1.0, true);
    Tensor b = random_tensor({7, 3}, rng, 1.0, true);
    Tensor loss = soft_cross_entropy(softmax(Tensor::zeros({5, 3})), matmul(a, b));
    backward(loss);
    std::vector<float> out = to_vec(loss);
    out.insert(out.end(), a.grad().begin(), a.grad().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(AttentionMaskTest, CausalAndSelfCheck) {
  AttentionMask m = AttentionMask::causal(3, 2);
  EXPECT_EQ(m.cols(), 5u);
  EXPECT_EQ(m.row_count(0), 3u);
  EXPECT_EQ(m.row_count(2), 5u);
  EXPECT_NO_THROW(m.check_self_attention(2));
  AttentionMask bad(1, 1);
  EXPECT_THROW(bad.check_self_attention(0), ValidationError);
}

}  // namespace
}  // namespace eaglet
