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

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "eaglet/drafting.hpp"
#include "eaglet/errors.hpp"
#include "eaglet/model.hpp"
#include "eaglet/real.hpp"
#include "eaglet/rng.hpp"
#include "eaglet/tensor.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

// Probabilities are handled in double inside verification.
using Dist = std::vector<double>;

Dist to_dist(std::span<const real> values);

struct VerifyOptions {
  // Temperature 0: accept iff the token is the target argmax; the bonus is
  // the argmax. No variates are consumed.
  bool greedy = false;
  // Negative control only. false drops the min(1, .) clamp from the
  // acceptance function, which the residual is derived from.
  bool clamp_acceptance = true;
};

struct TraceEntry {
  int candidate = 0;  // chain index or tree node id
  TokenId token = 0;
  bool accepted = false;
};

struct AcceptanceOutcome {
  std::vector<TokenId> accepted;
  TokenId bonus = 0;
  std::vector<int> path;  // accepted candidates (chain indices or node ids)
  std::vector<TraceEntry> trace;
  std::size_t offered = 0;
};

// min(1, p(token) / q(token)). Throws UsageError when q(token) == 0.
double acceptance_probability(std::span<const double> p, std::span<const double> q, TokenId token);

// norm(max(0, p - q)); nullopt is the accept-certain signal (all-zero
// residual, only possible when p == q).
std::optional<Dist> residual_distribution(std::span<const double> p, std::span<const double> q);

TokenId sample_dist(std::span<const double> dist, Rng& rng);
TokenId argmax_dist(std::span<const double> dist);

// Random choices made during verification. RngChooser is the production
// source: bernoulli(a) consumes one uniform u and returns u < a;
// categorical(d) consumes one uniform and inverts the CDF of d. Other
// choosers (for example exhaustive enumerators) can stand in for it.
struct RngChooser {
  Rng& rng;
  bool bernoulli(double a) { return rng.uniform() < a; }
  TokenId categorical(std::span<const double> dist) { return sample_dist(dist, rng); }
};

namespace detail {

inline double accept_fn(double p, double q, bool clamp) {
  const double ratio = p / q;
  return clamp ? std::min(1.0, ratio) : ratio;
}

std::optional<Dist> residual_with(std::span<const double> p, std::span<const double> q, bool clamp);

struct Decision {
  bool accepted;
  Dist next;  // working distribution after a rejection
};

template <typename Chooser>
Decision decide(const Dist& p, std::span<const double> q, TokenId token, Chooser& chooser,
                const VerifyOptions& options) {
  if (options.greedy) return {token == argmax_dist(p), p};
  if (std::equal(p.begin(), p.end(), q.begin(), q.end())) return {true, {}};
  const double a = options.clamp_acceptance ? acceptance_probability(p, q, token)
                                            : accept_fn(p[token], q[token], false);
  if (chooser.bernoulli(a)) return {true, {}};
  std::optional<Dist> r = residual_with(p, q, options.clamp_acceptance);
  // With the clamp removed the residual vanishes; fall back to p.
  return {false, r ? std::move(*r) : p};
}

template <typename Chooser>
TokenId draw_bonus(const Dist& p, Chooser& chooser, const VerifyOptions& options) {
  return options.greedy ? argmax_dist(p) : chooser.categorical(p);
}

}  // namespace detail

// P holds gamma + 1 target rows, Q and tokens gamma draft rows/tokens.
template <typename Chooser>
AcceptanceOutcome verify_chain_with(const std::vector<Dist>& P, const std::vector<Dist>& Q,
                                    std::span<const TokenId> tokens, Chooser& chooser,
                                    const VerifyOptions& options = {}) {
  const std::size_t gamma = tokens.size();
  if (Q.size() != gamma || P.size() != gamma + 1) {
    throw UsageError("verify_chain: need gamma + 1 target rows and gamma draft rows, got " +
                     std::to_string(P.size()) + ", " + std::to_string(Q.size()) + " for gamma " +
                     std::to_string(gamma));
  }
  AcceptanceOutcome out;
  out.offered = gamma;
  for (std::size_t i = 0; i < gamma; ++i) {
    detail::Decision d = detail::decide(P[i], Q[i], tokens[i], chooser, options);
    out.trace.push_back({static_cast<int>(i), tokens[i], d.accepted});
    if (!d.accepted) {
      out.bonus = detail::draw_bonus(d.next, chooser, options);
      return out;
    }
    out.accepted.push_back(tokens[i]);
    out.path.push_back(static_cast<int>(i));
  }
  out.bonus = detail::draw_bonus(P[gamma], chooser, options);
  return out;
}

// root_target is the target distribution at the bonus position;
// node_targets[i] is the target distribution at node i's context (over its
// children). Missing entries for visited nodes raise UsageError. Candidates
// are tried in generation order; each rejection replaces the working
// distribution by its residual.
template <typename Chooser>
AcceptanceOutcome verify_tree_with(const DraftTree& tree, const Dist& root_target,
                                   const std::vector<Dist>& node_targets, Chooser& chooser,
                                   const VerifyOptions& options = {}) {
  tree.validate();
  AcceptanceOutcome out;
  out.offered = tree.nodes.size();
  int node = -1;
  Dist p = root_target;
  while (true) {
    const std::span<const real> q_real = tree.dist_of_children(node);
    const Dist q = to_dist(q_real);
    int accepted_child = -1;
    for (int c : tree.children(node)) {
      const TokenId token = tree.nodes[c].token;
      detail::Decision d = detail::decide(p, q, token, chooser, options);
      out.trace.push_back({c, token, d.accepted});
      if (d.accepted) {
        accepted_child = c;
        break;
      }
      p = std::move(d.next);
    }
    if (accepted_child < 0) break;
    out.accepted.push_back(tree.nodes[accepted_child].token);
    out.path.push_back(accepted_child);
    node = accepted_child;
    if (static_cast<std::size_t>(node) >= node_targets.size() || node_targets[node].empty()) {
      throw UsageError("verify_tree: no target distribution for node " + std::to_string(node));
    }
    p = node_targets[node];
  }
  out.bonus = detail::draw_bonus(p, chooser, options);
  return out;
}

AcceptanceOutcome verify_chain(const std::vector<Dist>& P, const std::vector<Dist>& Q,
                               std::span<const TokenId> tokens, Rng& rng, const VerifyOptions& options = {});
AcceptanceOutcome verify_tree(const DraftTree& tree, const Dist& root_target, const std::vector<Dist>& node_targets,
                              Rng& rng, const VerifyOptions& options = {});

// Extends the committed state with the accepted tokens and the new bonus.
// target_features holds the verification forward's features: row 0 for the
// old bonus token, row 1 + r for the r-th candidate row (chain index or
// linearized node id). Only true target features are recorded.
void record_accepted_features(DraftState& state, const AcceptanceOutcome& outcome, const Tensor& target_features);

}  // namespace EAGLET_ABI
}  // namespace eaglet
