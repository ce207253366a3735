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

#include "eaglet/drafting.hpp"

#include <algorithm>
#include <numeric>

#include "eaglet/errors.hpp"
#include "eaglet/ops.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

void DraftState::check_alignment() const {
  if (hidden == 0 || features.size() % hidden != 0) throw UsageError("draft state: bad feature buffer");
  if (tokens.size() != feature_count() + 1) {
    throw UsageError("draft state: " + std::to_string(tokens.size()) + " tokens for " +
                     std::to_string(feature_count()) + " features; tokens must lead by one");
  }
}

namespace {

// Every row sees the committed slots, its ancestors' entries and itself.
AttentionMask expansion_mask(std::size_t occupancy, std::size_t round_base, const std::vector<int>& entry_parent,
                             std::span<const ExpandItem> items) {
  const std::size_t rows = items.size();
  AttentionMask mask(rows, occupancy + rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t s = 0; s < round_base; ++s) mask.set(i, s);
    for (int e = items[i].parent_entry; e >= 0; e = entry_parent[e]) mask.set(i, round_base + e);
    mask.set(i, occupancy + i);
  }
  return mask;
}

void check_items(std::span<const ExpandItem> items, const std::vector<int>& entry_parent) {
  if (items.empty()) throw UsageError("expand: no items");
  for (const ExpandItem& item : items) {
    if (item.parent_entry >= static_cast<int>(entry_parent.size())) {
      throw UsageError("expand: unknown parent entry " + std::to_string(item.parent_entry));
    }
    if (item.depth == 0) throw UsageError("expand: depth must be >= 1");
  }
}

Tensor last_row(const Tensor& t) {
  const std::size_t w = t.dim(1);
  auto d = t.data().subspan((t.dim(0) - 1) * w, w);
  return Tensor({1, w}, std::vector<real>(d.begin(), d.end()));
}

}  // namespace

EagleDrafter::EagleDrafter(std::shared_ptr<const DraftHeadWeights> head)
    : head_(std::move(head)), cache_(make_draft_cache(*head_)) {}

void EagleDrafter::reset() {
  cache_.clear();
  committed_pairs_ = 0;
  entry_parent_.clear();
  round_base_ = 0;
}

DraftStep EagleDrafter::root(const DraftState& state) {
  state.check_alignment();
  const std::size_t j = state.feature_count();
  if (j == 0) throw UsageError("draft root: no committed features; run prefill first");
  if (committed_pairs_ > j) reset();
  if (committed_pairs_ == j) --committed_pairs_;
  cache_.truncate(committed_pairs_);

  NoGradGuard guard;
  const std::size_t h = state.hidden;
  const std::size_t n = j - committed_pairs_;
  std::vector<real> feats(n * h);
  std::vector<TokenId> tokens(n);
  std::vector<std::int64_t> positions(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t k = committed_pairs_ + r;
    std::copy_n(state.feature(k).data(), h, feats.data() + r * h);
    tokens[r] = paired_token(head_->mode, state.tokens, k);
    positions[r] = static_cast<std::int64_t>(k);
  }
  Tensor features({n, h}, std::move(feats));
  Tensor predicted = draft_forward(*head_, features, tokens, positions,
                                   AttentionMask::causal(n, committed_pairs_), &cache_);
  ++forwards_;
  committed_pairs_ = j;
  round_base_ = cache_.occupancy();
  entry_parent_.clear();
  DraftStep step;
  step.features = last_row(predicted);
  step.logits = draft_logits(*head_, step.features);
  return step;
}

DraftStep EagleDrafter::expand(const DraftState& state, std::span<const ExpandItem> items) {
  check_items(items, entry_parent_);
  NoGradGuard guard;
  const std::size_t h = state.hidden;
  const std::size_t j = state.feature_count();
  const std::size_t rows = items.size();
  std::vector<real> feats(rows * h);
  std::vector<TokenId> tokens(rows);
  std::vector<std::int64_t> positions(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (items[r].context_feature.size() != h) throw DimensionError("expand: context feature width mismatch");
    std::copy_n(items[r].context_feature.data(), h, feats.data() + r * h);
    tokens[r] = head_->mode == DraftInputMode::kFeatureUnshiftedToken ? items[r].parent_token : items[r].token;
    positions[r] = static_cast<std::int64_t>(j + items[r].depth - 1);
  }
  AttentionMask mask = expansion_mask(cache_.occupancy(), round_base_, entry_parent_, items);
  Tensor predicted = draft_forward(*head_, Tensor({rows, h}, std::move(feats)), tokens, positions, mask, &cache_);
  ++forwards_;
  DraftStep step;
  step.first_entry = static_cast<int>(entry_parent_.size());
  for (const ExpandItem& item : items) entry_parent_.push_back(item.parent_entry);
  step.features = predicted;
  step.logits = draft_logits(*head_, predicted);
  return step;
}

TransformerDrafter::TransformerDrafter(std::shared_ptr<const TransformerWeights> model)
    : model_(std::move(model)), cache_(make_cache(*model_)) {}

void TransformerDrafter::reset() {
  cache_.clear();
  committed_tokens_ = 0;
  entry_parent_.clear();
  round_base_ = 0;
}

DraftStep TransformerDrafter::root(const DraftState& state) {
  const std::size_t total = state.committed();
  if (total == 0) throw UsageError("draft root: empty token stream");
  if (committed_tokens_ > total) reset();
  if (committed_tokens_ == total) --committed_tokens_;
  cache_.truncate(committed_tokens_);
  NoGradGuard guard;
  const std::size_t n = total - committed_tokens_;
  std::vector<std::int64_t> positions(n);
  std::iota(positions.begin(), positions.end(), static_cast<std::int64_t>(committed_tokens_));
  ForwardResult r = forward(*model_, std::span(state.tokens).subspan(committed_tokens_), positions,
                            AttentionMask::causal(n, committed_tokens_), &cache_);
  ++forwards_;
  committed_tokens_ = total;
  round_base_ = cache_.occupancy();
  entry_parent_.clear();
  return {last_row(r.logits), last_row(r.features), -1};
}

DraftStep TransformerDrafter::expand(const DraftState& state, std::span<const ExpandItem> items) {
  check_items(items, entry_parent_);
  NoGradGuard guard;
  const std::size_t j = state.committed() - 1;
  std::vector<TokenId> tokens(items.size());
  std::vector<std::int64_t> positions(items.size());
  for (std::size_t r = 0; r < items.size(); ++r) {
    tokens[r] = items[r].token;
    positions[r] = static_cast<std::int64_t>(j + items[r].depth);
  }
  AttentionMask mask = expansion_mask(cache_.occupancy(), round_base_, entry_parent_, items);
  ForwardResult r = forward(*model_, tokens, positions, mask, &cache_);
  ++forwards_;
  DraftStep step{r.logits, r.features, static_cast<int>(entry_parent_.size())};
  for (const ExpandItem& item : items) entry_parent_.push_back(item.parent_entry);
  return step;
}

std::size_t DraftTree::depth() const {
  std::size_t d = 0;
  for (const DraftNode& n : nodes) d = std::max(d, n.depth);
  return d;
}

std::vector<int> DraftTree::children(int parent) const {
  std::vector<int> out;
  for (const DraftNode& n : nodes) {
    if (n.parent == parent) out.push_back(n.id);
  }
  return out;
}

void DraftTree::validate() const {
  if (child_dists.size() != nodes.size() + 1) throw ValidationError("draft tree: child_dists size mismatch");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const DraftNode& n = nodes[i];
    if (n.id != static_cast<int>(i)) throw ValidationError("draft tree: node ids must equal their index");
    if (n.parent < -1 || n.parent >= n.id) {
      throw ValidationError("draft tree: node " + std::to_string(i) + " has parent " + std::to_string(n.parent) +
                            " (cyclic or forward link)");
    }
    const std::size_t want = n.parent < 0 ? 1 : nodes[n.parent].depth + 1;
    if (n.depth != want) throw ValidationError("draft tree: node " + std::to_string(i) + " has the wrong depth");
  }
}

std::vector<std::size_t> TreeTopology::allocation() const {
  if (branching.empty()) throw ValidationError("tree topology: branching list is empty");
  for (std::size_t k : branching) {
    if (k == 0) throw ValidationError("tree topology: branching factors must be >= 1");
  }
  const std::size_t m = branching.size();
  if (budget < branching[0] + (m - 1)) {
    throw ValidationError("tree topology: budget " + std::to_string(budget) + " cannot cover " +
                          std::to_string(branching[0]) + " root children plus one node per further depth");
  }
  std::vector<std::size_t> counts{branching[0]};
  std::size_t remaining = budget - branching[0];
  for (std::size_t d = 1; d < m; ++d) {
    const std::size_t cap = branching[d] + counts[d - 1] - 1;
    const std::size_t reserve = m - 1 - d;
    counts.push_back(std::min(cap, remaining - reserve));
    remaining -= counts.back();
  }
  if (remaining != 0) {
    throw ValidationError("tree topology: budget " + std::to_string(budget) + " exceeds the " +
                          std::to_string(budget - remaining) + " nodes this branching can hold");
  }
  return counts;
}

std::vector<real> draft_distribution(std::span<const real> logits, real temperature) {
  Tensor p = softmax(Tensor({logits.size()}, std::vector<real>(logits.begin(), logits.end())),
                     temperature > 0 ? temperature : real(1));
  return {p.data().begin(), p.data().end()};
}

namespace {

std::span<const real> row_of(const Tensor& t, std::size_t r) {
  const std::size_t w = t.dim(1);
  return t.data().subspan(r * w, w);
}

// k i.i.d. draws at T > 0 (one variate each); top-k distinct at T == 0.
std::vector<TokenId> pick_children(std::span<const real> q, std::size_t k, real temperature, Rng& rng) {
  std::vector<TokenId> out;
  if (temperature > 0) {
    for (std::size_t i = 0; i < k; ++i) out.push_back(sample_token(q, 1.0f, rng));
    return out;
  }
  if (k > q.size()) throw UsageError("greedy drafting: more children than vocabulary entries");
  std::vector<TokenId> order(q.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return q[a] > q[b]; });
  out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  return out;
}

}  // namespace

ChainDraft build_chain_draft(DraftState& state, Drafter& drafter, std::size_t gamma, real temperature) {
  if (gamma == 0) throw UsageError("chain draft: gamma must be >= 1");
  const std::uint64_t before = drafter.forward_count();
  ChainDraft chain;
  DraftStep step = drafter.root(state);
  std::vector<real> context(step.features.data().begin(), step.features.data().end());
  int entry = -1;
  for (std::size_t i = 0; i < gamma; ++i) {
    if (i > 0) {
      ExpandItem item;
      item.token = chain.tokens.back();
      item.parent_token = i == 1 ? state.tokens.back() : chain.tokens[i - 2];
      item.context_feature = context;
      item.depth = i;
      item.parent_entry = entry;
      step = drafter.expand(state, std::span(&item, 1));
      entry = step.first_entry;
      context.assign(step.features.data().begin(), step.features.data().end());
    }
    std::vector<real> q = draft_distribution(row_of(step.logits, 0), temperature);
    const TokenId token = pick_children(q, 1, temperature, state.rng)[0];
    chain.tokens.push_back(token);
    chain.dists.push_back(std::move(q));
    chain.features.push_back(context);
  }
  chain.draft_forwards = drafter.forward_count() - before;
  return chain;
}

DraftTree build_tree_draft(DraftState& state, Drafter& drafter, const TreeTopology& topology, real temperature) {
  const std::vector<std::size_t> counts = topology.allocation();
  const std::uint64_t before = drafter.forward_count();
  DraftTree tree;
  tree.prefix_len = state.committed();
  DraftStep step = drafter.root(state);
  tree.child_dists.push_back(draft_distribution(row_of(step.logits, 0), temperature));
  std::vector<real> root_feature(step.features.data().begin(), step.features.data().end());

  auto add_node = [&](int parent, TokenId token, const std::vector<real>& context) {
    DraftNode node;
    node.id = static_cast<int>(tree.nodes.size());
    node.parent = parent;
    node.token = token;
    node.draft_prob = tree.dist_of_children(parent)[token];
    node.depth = parent < 0 ? 1 : tree.nodes[parent].depth + 1;
    node.context_feature = context;
    tree.nodes.push_back(std::move(node));
    tree.child_dists.emplace_back();
  };

  for (TokenId t : pick_children(tree.child_dists[0], counts[0], temperature, state.rng)) {
    add_node(-1, t, root_feature);
  }
  std::vector<double> path_prob(tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) path_prob[i] = tree.nodes[i].draft_prob;

  for (std::size_t d = 1; d < counts.size(); ++d) {
    std::vector<int> frontier;
    for (const DraftNode& n : tree.nodes) {
      if (n.depth == d) frontier.push_back(n.id);
    }
    std::stable_sort(frontier.begin(), frontier.end(), [&](int a, int b) { return path_prob[a] > path_prob[b]; });
    // Best node takes k_d children, the rest one each in rank order.
    std::vector<std::size_t> child_count(frontier.size(), 0);
    std::size_t left = counts[d];
    child_count[0] = std::min(topology.branching[d], left);
    left -= child_count[0];
    for (std::size_t r = 1; r < frontier.size() && left > 0; ++r, --left) child_count[r] = 1;

    std::vector<ExpandItem> items;
    std::vector<int> expanded;
    for (std::size_t r = 0; r < frontier.size(); ++r) {
      if (child_count[r] == 0) continue;
      const DraftNode& n = tree.nodes[frontier[r]];
      ExpandItem item;
      item.token = n.token;
      item.parent_token = n.parent < 0 ? state.tokens.back() : tree.nodes[n.parent].token;
      item.context_feature = n.context_feature;
      item.depth = n.depth;
      item.parent_entry = n.parent < 0 ? -1 : tree.nodes[n.parent].entry;
      items.push_back(std::move(item));
      expanded.push_back(n.id);
    }
    step = drafter.expand(state, items);
    for (std::size_t r = 0; r < expanded.size(); ++r) {
      DraftNode& n = tree.nodes[expanded[r]];
      n.entry = step.first_entry + static_cast<int>(r);
      tree.child_dists[n.id + 1] = draft_distribution(row_of(step.logits, r), temperature);
    }
    for (std::size_t r = 0, e = 0; r < frontier.size(); ++r) {
      if (child_count[r] == 0) continue;
      const int parent = frontier[r];
      auto f = row_of(step.features, e++);
      std::vector<real> context(f.begin(), f.end());
      for (TokenId t : pick_children(tree.child_dists[parent + 1], child_count[r], temperature, state.rng)) {
        add_node(parent, t, context);
        path_prob.push_back(path_prob[parent] * tree.nodes.back().draft_prob);
      }
    }
  }
  tree.draft_forwards = drafter.forward_count() - before;
  return tree;
}

DraftTree chain_as_tree(const ChainDraft& chain, std::size_t prefix_len) {
  DraftTree tree;
  tree.prefix_len = prefix_len;
  tree.draft_forwards = chain.draft_forwards;
  for (std::size_t i = 0; i < chain.tokens.size(); ++i) {
    DraftNode n;
    n.id = static_cast<int>(i);
    n.parent = static_cast<int>(i) - 1;
    n.token = chain.tokens[i];
    n.draft_prob = chain.dists[i][chain.tokens[i]];
    n.depth = i + 1;
    n.context_feature = chain.features[i];
    tree.nodes.push_back(std::move(n));
    tree.child_dists.push_back(chain.dists[i]);
  }
  tree.child_dists.emplace_back();
  return tree;
}

AttentionMask tree_attention_mask(const DraftTree& tree, std::size_t prefix_len) {
  tree.validate();
  const std::size_t n = tree.nodes.size();
  AttentionMask mask(n, prefix_len + n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < prefix_len; ++s) mask.set(i, s);
    for (int a = static_cast<int>(i); a >= 0; a = tree.nodes[a].parent) mask.set(i, prefix_len + a);
  }
  return mask;
}

LinearizedTree linearize_tree(const DraftTree& tree) {
  tree.validate();
  LinearizedTree out;
  for (const DraftNode& n : tree.nodes) {
    out.tokens.push_back(n.token);
    out.positions.push_back(static_cast<std::int64_t>(tree.prefix_len + n.depth - 1));
    out.order.push_back(n.id);
    out.parents.push_back(n.parent);
  }
  return out;
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
