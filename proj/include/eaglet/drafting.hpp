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
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "eaglet/attention_mask.hpp"
#include "eaglet/draft_head.hpp"
#include "eaglet/kv_cache.hpp"
#include "eaglet/model.hpp"
#include "eaglet/real.hpp"
#include "eaglet/rng.hpp"
#include "eaglet/tensor.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

// Committed decoding state of one stream. tokens = t_0..t_j where t_j is the
// pending bonus token whose feature is not known yet; features holds the
// true target features f_0..f_{j-1}. The target cache holds t_0..t_{j-1}.
struct DraftState {
  std::size_t hidden = 0;
  std::vector<TokenId> tokens;
  std::vector<real> features;  // [j, hidden] row-major
  KVCache target_cache;
  Rng rng;

  std::size_t committed() const { return tokens.size(); }
  std::size_t feature_count() const { return hidden ? features.size() / hidden : 0; }
  std::span<const real> feature(std::size_t k) const { return {features.data() + k * hidden, hidden}; }
  // Throws UsageError unless features lag tokens by exactly one.
  void check_alignment() const;
};

// One row of drafter output: logits over the vocabulary and the feature that
// produced them (the context feature for the next expansion).
struct DraftStep {
  Tensor logits;  // [rows, V]
  Tensor features;  // [rows, H]
  int first_entry = -1;  // entry id of row 0 for expand(), -1 for root()
};

// A request to continue the draft below one node.
struct ExpandItem {
  TokenId token = 0;  // the node's token
  TokenId parent_token = 0;  // its parent's token (t_j for depth-1 nodes)
  std::vector<real> context_feature;  // feature whose logits produced `token`
  std::size_t depth = 1;
  int parent_entry = -1;  // entry returned by an earlier expand, -1 at depth 1
};

// Source of draft distributions. root() syncs with the committed state and
// returns the distribution for t_{j+1}; expand() runs one forward over all
// items and returns one child distribution per item. Each call is one
// forward pass. Entries are numbered per round in call order.
class Drafter {
 public:
  virtual ~Drafter() = default;
  virtual DraftStep root(const DraftState& state) = 0;
  virtual DraftStep expand(const DraftState& state, std::span<const ExpandItem> items) = 0;
  // Forgets everything; the next root() recomputes from scratch.
  virtual void reset() = 0;
  virtual std::string name() const = 0;
  std::uint64_t forward_count() const { return forwards_; }

 protected:
  std::uint64_t forwards_ = 0;
};

// The EAGLE head (any input mode) with its own KV cache.
class EagleDrafter : public Drafter {
 public:
  explicit EagleDrafter(std::shared_ptr<const DraftHeadWeights> head);
  DraftStep root(const DraftState& state) override;
  DraftStep expand(const DraftState& state, std::span<const ExpandItem> items) override;
  void reset() override;
  std::string name() const override { return "eagle:" + draft_input_mode_name(head_->mode); }
  const DraftHeadWeights& head() const { return *head_; }

 private:
  std::shared_ptr<const DraftHeadWeights> head_;
  KVCache cache_;
  std::size_t committed_pairs_ = 0;
  std::vector<int> entry_parent_;
  std::size_t round_base_ = 0;
};

// Token-level drafting with a full transformer. With the target's own weights
// this is the perfect-draft oracle.
class TransformerDrafter : public Drafter {
 public:
  explicit TransformerDrafter(std::shared_ptr<const TransformerWeights> model);
  DraftStep root(const DraftState& state) override;
  DraftStep expand(const DraftState& state, std::span<const ExpandItem> items) override;
  void reset() override;
  std::string name() const override { return "transformer"; }

 private:
  std::shared_ptr<const TransformerWeights> model_;
  KVCache cache_;
  std::size_t committed_tokens_ = 0;
  std::vector<int> entry_parent_;
  std::size_t round_base_ = 0;
};

struct DraftNode {
  int id = 0;
  int parent = -1;  // -1 for children of the root
  TokenId token = 0;
  real draft_prob = 0;  // parent's child distribution at `token`
  std::size_t depth = 1;
  std::vector<real> context_feature;  // feature whose logits gave this node's distribution
  int entry = -1;  // drafter entry if expanded
};

// Nodes in generation order: parents before children, siblings by insertion.
// child_dists[0] is the root's child distribution; child_dists[i + 1] belongs
// to node i and is empty for unexpanded nodes.
struct DraftTree {
  std::size_t prefix_len = 0;  // committed tokens, including the pending bonus
  std::vector<DraftNode> nodes;
  std::vector<std::vector<real>> child_dists;
  std::uint64_t draft_forwards = 0;

  std::size_t depth() const;
  std::span<const real> dist_of_children(int parent) const { return child_dists[parent + 1]; }
  std::vector<int> children(int parent) const;
  // Throws ValidationError on cyclic or forward parent links.
  void validate() const;
};

struct TreeTopology {
  std::vector<std::size_t> branching{4, 2, 1};
  std::size_t budget = 10;

  std::size_t depth() const { return branching.size(); }
  // Nodes allocated per depth for this topology; throws ValidationError when
  // the budget cannot be met exactly.
  std::vector<std::size_t> allocation() const;
  void validate() const { allocation(); }
};

struct ChainDraft {
  std::vector<TokenId> tokens;
  std::vector<std::vector<real>> dists;  // q_i at temperature (T = 1 at T = 0)
  std::vector<std::vector<real>> features;
  std::uint64_t draft_forwards = 0;
};

// Draft distribution used for sampling and verification: softmax at T, or at
// T = 1 when T == 0 (greedy drafting ranks by it and takes the argmax).
std::vector<real> draft_distribution(std::span<const real> logits, real temperature);

ChainDraft build_chain_draft(DraftState& state, Drafter& drafter, std::size_t gamma, real temperature);
DraftTree build_tree_draft(DraftState& state, Drafter& drafter, const TreeTopology& topology, real temperature);
DraftTree chain_as_tree(const ChainDraft& chain, std::size_t prefix_len);

// Node i sees every prefix slot and exactly its ancestor chain plus itself.
AttentionMask tree_attention_mask(const DraftTree& tree, std::size_t prefix_len);

struct LinearizedTree {
  std::vector<TokenId> tokens;
  std::vector<std::int64_t> positions;  // prefix_len + depth - 1
  std::vector<int> order;  // node ids
  std::vector<int> parents;  // parent position in `order`, -1 at depth 1
};
LinearizedTree linearize_tree(const DraftTree& tree);

}  // namespace EAGLET_ABI
}  // namespace eaglet
