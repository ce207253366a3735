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

#include "eaglet/verification.hpp"

#include <algorithm>

#include "eaglet/errors.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

Dist to_dist(std::span<const real> values) { return Dist(values.begin(), values.end()); }

namespace detail {

// max(0, p - q * a) with a the acceptance function; equals max(0, p - q)
// when a is clamped.
std::optional<Dist> residual_with(std::span<const double> p, std::span<const double> q, bool clamp) {
  if (p.size() != q.size()) throw UsageError("residual: distributions differ in size");
  Dist r(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    // q * min(1, p / q) is min(p, q); spelled out so it is exact.
    const double taken = clamp ? std::min(p[i], q[i]) : q[i] * accept_fn(p[i], q[i], false);
    r[i] = q[i] > 0.0 ? std::max(0.0, p[i] - taken) : p[i];
    total += r[i];
  }
  // Unclamped, every term cancels up to rounding.
  if (total <= 0.0 || (!clamp && total < 1e-12)) return std::nullopt;
  for (double& v : r) v /= total;
  return r;
}

}  // namespace detail

TokenId argmax_dist(std::span<const double> dist) {
  if (dist.empty()) throw DimensionError("argmax of empty distribution");
  return static_cast<TokenId>(std::max_element(dist.begin(), dist.end()) - dist.begin());
}

TokenId sample_dist(std::span<const double> dist, Rng& rng) {
  double total = 0.0;
  for (double p : dist) total += p;
  const double threshold = rng.uniform() * total;
  double cumulative = 0.0;
  TokenId last_positive = 0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    cumulative += dist[i];
    last_positive = static_cast<TokenId>(i);
    if (cumulative > threshold) return last_positive;
  }
  return last_positive;
}

double acceptance_probability(std::span<const double> p, std::span<const double> q, TokenId token) {
  if (token < 0 || static_cast<std::size_t>(token) >= q.size() || p.size() != q.size()) {
    throw UsageError("acceptance_probability: token or sizes out of range");
  }
  if (q[token] <= 0.0) throw UsageError("acceptance_probability: draft gives token " + std::to_string(token) +
                                        " zero probability");
  return detail::accept_fn(p[token], q[token], true);
}

std::optional<Dist> residual_distribution(std::span<const double> p, std::span<const double> q) {
  return detail::residual_with(p, q, true);
}

AcceptanceOutcome verify_chain(const std::vector<Dist>& P, const std::vector<Dist>& Q,
                               std::span<const TokenId> tokens, Rng& rng, const VerifyOptions& options) {
  RngChooser chooser{rng};
  return verify_chain_with(P, Q, tokens, chooser, options);
}

AcceptanceOutcome verify_tree(const DraftTree& tree, const Dist& root_target, const std::vector<Dist>& node_targets,
                              Rng& rng, const VerifyOptions& options) {
  RngChooser chooser{rng};
  return verify_tree_with(tree, root_target, node_targets, chooser, options);
}

void record_accepted_features(DraftState& state, const AcceptanceOutcome& outcome, const Tensor& target_features) {
  state.check_alignment();
  const std::size_t h = state.hidden;
  if (target_features.rank() != 2 || target_features.dim(1) != h) {
    throw DimensionError("record_accepted_features: feature width mismatch");
  }
  auto append_row = [&](std::size_t r) {
    if (r >= target_features.dim(0)) throw UsageError("record_accepted_features: missing feature row");
    auto row = target_features.data().subspan(r * h, h);
    state.features.insert(state.features.end(), row.begin(), row.end());
  };
  append_row(0);
  for (int candidate : outcome.path) append_row(1 + static_cast<std::size_t>(candidate));
  state.tokens.insert(state.tokens.end(), outcome.accepted.begin(), outcome.accepted.end());
  state.tokens.push_back(outcome.bonus);
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
