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

#include <gtest/gtest.h>

#include <numeric>
#include <set>

#include "eaglet/engine.hpp"
#include "eaglet/errors.hpp"
#include "test_util.hpp"

namespace eaglet {
namespace {

using testing::random_tokens;
using testing::row;
using testing::tiny_target;

std::shared_ptr<const DraftHeadWeights> tiny_head(const TransformerWeights& target,
                                                  DraftInputMode mode = DraftInputMode::kFeatureShiftedToken) {
  return std::make_shared<const DraftHeadWeights>(init_draft_head(target, mode, 11));
}

// A session that has processed `prompt` and holds a pending bonus token.
Session primed_session(std::shared_ptr<const TransformerWeights> target, Drafter* drafter,
                       std::span<const TokenId> prompt, real temperature = 0) {
  GenerationParams params;
  params.mode = DecodeMode::kChain;
  params.temperature = temperature;
  params.seed = 5;
  Session s(std::move(target), drafter, params);
  s.prefill(prompt);
  return s;
}

TEST(TreeTopology, AllocatesTheBudgetDepthByDepth) {
  EXPECT_EQ((TreeTopology{{4, 2, 1}, 10}.allocation()), (std::vector<std::size_t>{4, 5, 1}));
  EXPECT_EQ((TreeTopology{{1, 1, 1}, 3}.allocation()), (std::vector<std::size_t>{1, 1, 1}));
  EXPECT_EQ((TreeTopology{{2, 2}, 5}.allocation()), (std::vector<std::size_t>{2, 3}));
  EXPECT_THROW((TreeTopology{{4, 2, 1}, 5}.allocation()), ValidationError);
  EXPECT_THROW((TreeTopology{{4, 2, 1}, 40}.allocation()), ValidationError);
  EXPECT_THROW((TreeTopology{{2, 0}, 3}.allocation()), ValidationError);
  EXPECT_THROW((TreeTopology{{}, 3}.allocation()), ValidationError);
}

TEST(BuildTreeDraft, DefaultTopologyGivesTenNodesInThreePasses) {
  auto target = tiny_target();
  EagleDrafter drafter(tiny_head(*target));
  Rng rng(1);
  const auto prompt = random_tokens(12, 32, rng);
  for (real temperature : {real(0), real(1)}) {
    Session s = primed_session(target, &drafter, prompt, temperature);
    DraftTree tree = build_tree_draft(s.mutable_state(), drafter, TreeTopology{}, temperature);
    EXPECT_EQ(tree.nodes.size(), 10u);
    EXPECT_EQ(tree.depth(), 3u);
    EXPECT_EQ(tree.draft_forwards, 3u);
    EXPECT_NO_THROW(tree.validate());
    std::vector<std::size_t> per_depth(4, 0);
    for (const DraftNode& n : tree.nodes) ++per_depth[n.depth];
    EXPECT_EQ(per_depth, (std::vector<std::size_t>{0, 4, 5, 1}));
  }
}

TEST(BuildTreeDraft, PassCountEqualsDepth) {
  auto target = tiny_target();
  EagleDrafter drafter(tiny_head(*target));
  Rng rng(2);
  const auto prompt = random_tokens(9, 32, rng);
  for (const TreeTopology& topo :
       {TreeTopology{{3}, 3}, TreeTopology{{2, 2}, 5}, TreeTopology{{3, 2, 2, 1}, 12}, TreeTopology{{1, 1, 1, 1, 1}, 5}}) {
    Session s = primed_session(target, &drafter, prompt);
    DraftTree tree = build_tree_draft(s.mutable_state(), drafter, topo, 0);
    EXPECT_EQ(tree.draft_forwards, topo.depth());
    EXPECT_EQ(tree.nodes.size(), topo.budget);
  }
}

TEST(BuildTreeDraft, NodeProbabilitiesComeFromTheParentDistribution) {
  auto target = tiny_target();
  EagleDrafter drafter(tiny_head(*target));
  Rng rng(3);
  const auto prompt = random_tokens(10, 32, rng);
  Session s = primed_session(target, &drafter, prompt, 1);
  DraftTree tree = build_tree_draft(s.mutable_state(), drafter, TreeTopology{{3, 2, 2}, 8}, 0.7f);
  for (const auto& d : tree.child_dists) {
    if (d.empty()) continue;
    EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-5);
  }
  for (const DraftNode& n : tree.nodes) EXPECT_EQ(n.draft_prob, tree.dist_of_children(n.parent)[n.token]);
}

TEST(BuildTreeDraft, GreedyChildrenAreTheTopTokens) {
  auto target = tiny_target();
  EagleDrafter drafter(tiny_head(*target));
  Rng rng(4);
  const auto prompt = random_tokens(10, 32, rng);
  Session s = primed_session(target, &drafter, prompt);
  DraftTree tree = build_tree_draft(s.mutable_state(), drafter, TreeTopology{}, 0);
  const auto root = tree.dist_of_children(-1);
  std::vector<TokenId> order(root.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return root[a] > root[b]; });
  std::vector<TokenId> kids;
  for (int c : tree.children(-1)) kids.push_back(tree.nodes[c].token);
  EXPECT_EQ(kids, std::vector<TokenId>(order.begin(), order.begin() + 4));
  // The best depth-1 node gets two children.
  EXPECT_EQ(tree.children(0).size(), 2u);
}

TEST(BuildTreeDraft, UnitBranchingMatchesTheChain) {
  auto target = tiny_target();
  EagleDrafter drafter(tiny_head(*target));
  Rng rng(5);
  const auto prompt = random_tokens(14, 32, rng);
  for (real temperature : {real(0), real(0.8)}) {
    Session a = primed_session(target, &drafter, prompt, temperature);
    ChainDraft chain = build_chain_draft(a.mutable_state(), drafter, 3, temperature);
    Session b = primed_session(target, &drafter, prompt, temperature);
    DraftTree tree = build_tree_draft(b.mutable_state(), drafter, TreeTopology{{1, 1, 1}, 3}, temperature);
    ASSERT_EQ(tree.nodes.size(), 3u);
    EXPECT_EQ(chain.draft_forwards, tree.draft_forwards);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(tree.nodes[i].token, chain.tokens[i]);
      EXPECT_EQ(tree.child_dists[i], chain.dists[i]);
      EXPECT_EQ(tree.nodes[i].context_feature, chain.features[i]);
    }
    DraftTree as_tree = chain_as_tree(chain, a.state().committed());
    EXPECT_EQ(tree_attention_mask(as_tree, 7), tree_attention_mask(tree, 7));
  }
}

TEST(TreeAttentionMask, RowsSeePrefixAncestorsAndSelfOnly) {
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(15);
    const std::size_t prefix = rng.below(6);
    DraftTree tree;
    tree.prefix_len = prefix;
    tree.child_dists.emplace_back();
    for (std::size_t i = 0; i < n; ++i) {
      DraftNode node;
      node.id = static_cast<int>(i);
      node.parent = static_cast<int>(rng.below(i + 1)) - 1;
      node.depth = node.parent < 0 ? 1 : tree.nodes[node.parent].depth + 1;
      tree.nodes.push_back(node);
      tree.child_dists.emplace_back();
    }
    const AttentionMask mask = tree_attention_mask(tree, prefix);
    ASSERT_EQ(mask.rows(), n);
    ASSERT_EQ(mask.cols(), prefix + n);
    for (std::size_t i = 0; i < n; ++i) {
      std::set<std::size_t> ancestors;
      for (int a = static_cast<int>(i); a >= 0; a = tree.nodes[a].parent) ancestors.insert(a);
      for (std::size_t c = 0; c < prefix; ++c) EXPECT_TRUE(mask.allowed(i, c));
      for (std::size_t k = 0; k < n; ++k) EXPECT_EQ(mask.allowed(i, prefix + k), ancestors.count(k) == 1);
      EXPECT_EQ(mask.row_count(i), prefix + tree.nodes[i].depth);
    }
    const LinearizedTree lin = linearize_tree(tree);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(lin.positions[i], static_cast<std::int64_t>(prefix + tree.nodes[i].depth - 1));
    }
  }
}

TEST(DraftTree, RejectsCyclicAndForwardLinks) {
  DraftTree tree;
  tree.child_dists.resize(3);
  tree.nodes.resize(2);
  tree.nodes[0] = {0, -1, 0, 0, 1, {}, -1};
  tree.nodes[1] = {1, 1, 0, 0, 2, {}, -1};
  EXPECT_THROW(tree.validate(), ValidationError);
  EXPECT_THROW(tree_attention_mask(tree, 3), ValidationError);
  tree.nodes[1].parent = 0;
  tree.nodes[0].parent = 1;
  EXPECT_THROW(tree.validate(), ValidationError);
  tree.nodes[0].parent = -1;
  EXPECT_NO_THROW(tree.validate());
  tree.nodes[1].depth = 3;
  EXPECT_THROW(linearize_tree(tree), ValidationError);
}

TEST(VerificationMask, PrependsACausalBonusRow) {
  DraftTree tree;
  tree.child_dists.resize(3);
  tree.nodes = {{0, -1, 0, 0, 1, {}, -1}, {1, 0, 0, 0, 2, {}, -1}};
  const AttentionMask m = verification_mask(tree, 4);
  ASSERT_EQ(m.rows(), 3u);
  ASSERT_EQ(m.cols(), 7u);
  EXPECT_EQ(m.to_string(), AttentionMask::causal(3, 4).to_string());
  tree.nodes[1].parent = -1;
  tree.nodes[1].depth = 1;
  const AttentionMask s = verification_mask(tree, 4);
  EXPECT_TRUE(s.allowed(2, 4));
  EXPECT_FALSE(s.allowed(2, 5));
  EXPECT_TRUE(s.allowed(2, 6));
}

// The oracle drafter's distributions are the target's own.
TEST(TransformerDrafter, TreeNodesReproduceTheTargetAlongEachPath) {
  auto target = tiny_target();
  TransformerDrafter drafter(target);
  Rng rng(7);
  const auto prompt = random_tokens(11, 32, rng);
  Session s = primed_session(target, &drafter, prompt, 1);
  DraftTree tree = build_tree_draft(s.mutable_state(), drafter, TreeTopology{{3, 2, 2}, 8}, 1);
  for (int parent = -1; parent < static_cast<int>(tree.nodes.size()); ++parent) {
    const auto q = tree.dist_of_children(parent);
    if (q.empty()) continue;
    std::vector<TokenId> seq = s.state().tokens;
    std::vector<TokenId> path;
    for (int a = parent; a >= 0; a = tree.nodes[a].parent) path.insert(path.begin(), tree.nodes[a].token);
    seq.insert(seq.end(), path.begin(), path.end());
    ForwardResult full = forward(*target, seq, testing::iota_positions(seq.size()), AttentionMask::causal(seq.size()), nullptr);
    const auto want = draft_distribution(row(full.logits, seq.size() - 1), 1);
    for (std::size_t v = 0; v < want.size(); ++v) EXPECT_NEAR(q[v], want[v], 1e-5);
  }
}

TEST(TransformerDrafter, GreedyChainIsTheGreedyContinuation) {
  auto target = tiny_target();
  TransformerDrafter drafter(target);
  Rng rng(8);
  const auto prompt = random_tokens(6, 32, rng);
  Session s = primed_session(target, &drafter, prompt, 0);
  ChainDraft chain = build_chain_draft(s.mutable_state(), drafter, 5, 0);
  std::vector<TokenId> seq = s.state().tokens;
  for (std::size_t i = 0; i < 5; ++i) {
    ForwardResult r = forward(*target, seq, testing::iota_positions(seq.size()), AttentionMask::causal(seq.size()), nullptr);
    const TokenId next = argmax(row(r.logits, seq.size() - 1));
    EXPECT_EQ(chain.tokens[i], next);
    seq.push_back(next);
  }
}

// Expanding under the tree mask equals running the head over the flattened
// path of (feature, token) pairs.
TEST(EagleDrafter, ExpansionsMatchAMonolithicPass) {
  auto target = tiny_target();
  for (DraftInputMode mode : {DraftInputMode::kFeatureShiftedToken, DraftInputMode::kFeatureUnshiftedToken}) {
    auto head = tiny_head(*target, mode);
    EagleDrafter drafter(head);
    Rng rng(9);
    const auto prompt = random_tokens(10, 32, rng);
    Session s = primed_session(target, &drafter, prompt, 1);
    DraftTree tree = build_tree_draft(s.mutable_state(), drafter, TreeTopology{{3, 2, 1}, 7}, 1);
    const DraftState& st = s.state();
    const std::size_t j = st.feature_count();
    const std::size_t h = st.hidden;
    for (const DraftNode& node : tree.nodes) {
      if (tree.dist_of_children(node.id).empty()) continue;
      std::vector<int> chain;
      for (int a = node.id; a >= 0; a = tree.nodes[a].parent) chain.insert(chain.begin(), a);
      std::vector<TokenId> all = st.tokens;
      for (int a : chain) all.push_back(tree.nodes[a].token);
      std::vector<real> feats = st.features;
      for (int a : chain) feats.insert(feats.end(), tree.nodes[a].context_feature.begin(), tree.nodes[a].context_feature.end());
      const std::size_t n = j + chain.size();
      std::vector<TokenId> tokens(n);
      for (std::size_t k = 0; k < n; ++k) tokens[k] = paired_token(mode, all, k);
      NoGradGuard guard;
      Tensor predicted = draft_forward(*head, Tensor({n, h}, feats), tokens, testing::iota_positions(n),
                                       AttentionMask::causal(n), nullptr);
      Tensor logits = draft_logits(*head, Tensor({1, h}, std::vector<real>(row(predicted, n - 1).begin(),
                                                                          row(predicted, n - 1).end())));
      const auto want = draft_distribution(logits.data(), 1);
      const auto got = tree.dist_of_children(node.id);
      for (std::size_t v = 0; v < want.size(); ++v) EXPECT_NEAR(got[v], want[v], 1e-5) << "node " << node.id;
    }
  }
}

TEST(EagleDrafter, RootNeedsCommittedFeatures) {
  auto target = tiny_target();
  EagleDrafter drafter(tiny_head(*target));
  DraftState state;
  state.hidden = 32;
  state.tokens = {1};
  EXPECT_THROW(drafter.root(state), UsageError);
  state.tokens = {1, 2, 3};
  state.features.assign(32, 0);
  EXPECT_THROW(drafter.root(state), UsageError);
}

TEST(Drafter, ExpandRejectsUnknownEntries) {
  auto target = tiny_target();
  EagleDrafter drafter(tiny_head(*target));
  Rng rng(10);
  const auto prompt = random_tokens(5, 32, rng);
  Session s = primed_session(target, &drafter, prompt);
  DraftStep root = drafter.root(s.state());
  ExpandItem item;
  item.context_feature.assign(root.features.data().begin(), root.features.data().end());
  item.parent_entry = 3;
  EXPECT_THROW(drafter.expand(s.state(), std::span(&item, 1)), UsageError);
  EXPECT_THROW(drafter.expand(s.state(), std::span<const ExpandItem>{}), UsageError);
}

TEST(DraftDistribution, UsesUnitTemperatureWhenGreedy) {
  const std::vector<real> logits{1, 2, 3};
  EXPECT_EQ(draft_distribution(logits, 0), draft_distribution(logits, 1));
  const auto sharp = draft_distribution(logits, 0.5f);
  EXPECT_GT(sharp[2], draft_distribution(logits, 1)[2]);
}

}  // namespace
}  // namespace eaglet
