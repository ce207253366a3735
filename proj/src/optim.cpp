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

#include "eaglet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eaglet/errors.hpp"
#include "eaglet/rng.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

void adamw_step(std::span<Tensor> params, OptimizerState& state, const AdamWOptions& options) {
  if (!(options.lr > 0.0f)) throw UsageError("adamw_step: learning rate must be positive");
  if (state.first_moment.empty()) {
    for (const Tensor& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0f);
      state.second_moment.emplace_back(p.numel(), 0.0f);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adamw_step: optimizer state tracks " +
                         std::to_string(state.first_moment.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].numel()) {
      throw DimensionError("adamw_step: moment shape mismatch for parameter " + std::to_string(i));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const real bias1 = static_cast<real>(1.0 - std::pow(static_cast<double>(options.beta1), t));
  const real bias2 = static_cast<real>(1.0 - std::pow(static_cast<double>(options.beta2), t));
  const real decay = 1.0f - options.lr * options.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    auto w = p.mutable_data();
    const bool has_grad = p.has_grad();
    std::span<const real> g = has_grad ? p.grad() : std::span<const real>{};
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const real gj = has_grad ? g[j] : 0.0f;
      m[j] = options.beta1 * m[j] + (1.0f - options.beta1) * gj;
      v[j] = options.beta2 * v[j] + (1.0f - options.beta2) * gj * gj;
      const real m_hat = m[j] / bias1;
      const real v_hat = v[j] / bias2;
      w[j] = w[j] * decay - options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

double global_grad_norm(std::span<const Tensor> params) {
  double total = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (real g : p.grad()) total += static_cast<double>(g) * g;
  }
  return std::sqrt(total);
}

double clip_grad_norm(std::span<Tensor> params, real max_norm) {
  if (!(max_norm > 0.0f)) throw UsageError("clip_grad_norm: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm > max_norm) {
    const real factor = static_cast<real>(max_norm / norm);
    for (Tensor& p : params) {
      if (!p.has_grad()) continue;
      for (real& g : p.mutable_grad()) g *= factor;
    }
  }
  return norm;
}

AdamW::AdamW(std::vector<Tensor> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {}

void AdamW::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void AdamW::step() { adamw_step(params_, state_, options_); }

double gradient_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                      const GradientCheckOptions& options) {
  if (options.epsilon < 1e-5f || options.epsilon > 1e-2f) {
    throw UsageError("gradient_check: epsilon must lie in [1e-5, 1e-2]");
  }
  for (Tensor& p : params) p.zero_grad();
  Tensor loss = loss_fn();
  if (loss.numel() != 1) throw UsageError("gradient_check: function output is not a scalar");
  backward(loss);

  Rng rng(options.seed);
  double worst = 0.0;
  for (Tensor& p : params) {
    std::vector<real> analytic(p.grad().begin(), p.grad().end());
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords_per_param) {
      for (std::size_t i = 0; i < options.max_coords_per_param; ++i) {
        std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
      }
      coords.resize(options.max_coords_per_param);
    }
    auto w = p.mutable_data();
    for (std::size_t c : coords) {
      const real original = w[c];
      w[c] = original + options.epsilon;
      const double up = loss_fn().item();
      w[c] = original - options.epsilon;
      const double down = loss_fn().item();
      w[c] = original;
      const double step = static_cast<double>(original + options.epsilon) -
                          static_cast<double>(original - options.epsilon);
      const double numeric = (up - down) / step;
      const double a = analytic[c];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.abs_floor});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
