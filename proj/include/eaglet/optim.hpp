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
#include <functional>
#include <span>
#include <vector>

#include "eaglet/real.hpp"
#include "eaglet/tensor.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

struct AdamWOptions {
  real lr = 3e-5f;
  real beta1 = 0.9f;
  real beta2 = 0.95f;
  real eps = 1e-8f;
  real weight_decay = 0.0f;
};

// First/second moments per parameter plus the number of completed updates.
struct OptimizerState {
  std::vector<std::vector<real>> first_moment;
  std::vector<std::vector<real>> second_moment;
  std::uint64_t step = 0;
};

// Decoupled weight decay Adam with bias correction. Parameters are updated
// in place from their accumulated gradients; missing gradients count as 0.
void adamw_step(std::span<Tensor> params, OptimizerState& state, const AdamWOptions& options);

// Scales every gradient by max_norm / global_norm when the global L2 norm
// exceeds max_norm. Returns the norm measured before clipping.
double clip_grad_norm(std::span<Tensor> params, real max_norm);

double global_grad_norm(std::span<const Tensor> params);

class AdamW {
 public:
  AdamW(std::vector<Tensor> params, AdamWOptions options);

  void zero_grad();
  void step();
  const OptimizerState& state() const { return state_; }
  std::vector<Tensor>& params() { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamWOptions options_;
  OptimizerState state_;
};

// Maximum relative error between reverse-mode gradients and central finite
// differences over sampled coordinates of `params`. `loss_fn` must rebuild
// the graph from the current parameter values on every call.
struct GradientCheckOptions {
  real epsilon = 1e-3f;
  std::size_t max_coords_per_param = 24;
  std::uint64_t seed = 7;
  // Denominator floor: errors on coordinates whose gradients are both below
  // this magnitude are measured in absolute terms.
  double abs_floor = 1e-4;
};

double gradient_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                      const GradientCheckOptions& options = {});

}  // namespace EAGLET_ABI
}  // namespace eaglet
