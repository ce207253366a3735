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


#include "eaglet/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "eaglet/checkpoint.hpp"
#include "eaglet/engine.hpp"
#include "eaglet/errors.hpp"
#include "eaglet/ops.hpp"
#include "test_util.hpp"

namespace eaglet {
namespace {

using testing::iota_positions;
using testing::row;

// Tiny byte-level target.
ModelConfig byte_config() {
  ModelConfig c = testing::tiny_config();
  c.vocab_size = kByteVocab;
  return c;
}

std::shared_ptr<const TransformerWeights> byte_target() {
  return std::make_shared<const TransformerWeights>(init_target(byte_config()));
}

TEST(Corpus, ParsesTokensAndText) {
  Corpus c = parse_corpus("{\"tokens\":[1,2,3]}\n\n{\"text\":\"ab\"}\n");
  ASSERT_EQ(c.sequences.size(), 2u);
  EXPECT_EQ(c.sequences[0], (std::vector<TokenId>{1, 2, 3}));
  EXPECT_EQ(c.sequences[1], (std::vector<TokenId>{97, 98}));
  EXPECT_EQ(c.total_tokens(), 5u);
}

TEST(Corpus, ErrorsNameTheLine) {
  try {
    parse_corpus("{\"tokens\":[1]}\n{\"tokens\":[1,\n", 256, "c.jsonl");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("c.jsonl:2:"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_corpus("{\"tokens\":[300]}", 256), ValidationError);
  EXPECT_THROW(parse_corpus("{\"tokens\":[-1]}", 256), ValidationError);
  EXPECT_THROW(parse_corpus("{\"text\":\"a\",\"extra\":1}"), ValidationError);
  EXPECT_THROW(parse_corpus("{\"tokens\":[]}"), ValidationError);
  EXPECT_THROW(parse_corpus("{\"text\":\"z\"}", 100), ValidationError);
}

TEST(Corpus, EmptyFileIsAnError) {
  const auto path = std::filesystem::temp_directory_path() / "eaglet_empty_corpus.jsonl";
  std::ofstream(path).close();
  EXPECT_THROW(ingest_corpus(path), ValidationError);
  std::filesystem::remove(path);
  EXPECT_THROW(ingest_corpus(path), ValidationError);
}

TEST(SyntheticCorpus, IsDeterministicAndIngestible) {
  const std::string a = synthetic_corpus_jsonl(4, 1000);
  EXPECT_EQ(a, synthetic_corpus_jsonl(4, 1000));
  EXPECT_NE(a, synthetic_corpus_jsonl(5, 1000));
  Corpus parsed = parse_corpus(a);
  EXPECT_GE(parsed.total_tokens(), 1000u);
  EXPECT_EQ(parsed.sequences, synthetic_corpus(4, 1000).sequences);
  EXPECT_NO_THROW(parsed.validate(kByteVocab));
}

TEST(SyntheticCorpus, SplitIsDisjointAndComplete) {
  Corpus c = synthetic_corpus(1, 5000);
  auto [train, held] = split_corpus(c, 0.1);
  EXPECT_EQ(train.sequences.size() + held.sequences.size(), c.sequences.size());
  EXPECT_FALSE(held.sequences.empty());
  EXPECT_THROW(split_corpus(c, 0), UsageError);
}

TEST(CollectTrainingPairs, WindowOfNTokensHasNMinusTwoPairs) {
  auto target = byte_target();
  Corpus c = parse_corpus("{\"text\":\"hello world\"}\n{\"text\":\"ab\"}\n{\"text\":\"a\"}\n");
  TrainingPairs pairs = collect_training_pairs(*target, c, DataMode::kFixedDataset);
  ASSERT_EQ(pairs.sequences.size(), 3u);
  EXPECT_EQ(pairs.sequences[0].pair_count(), 9u);
  EXPECT_EQ(pairs.sequences[1].pair_count(), 0u);
  EXPECT_EQ(pairs.sequences[2].pair_count(), 0u);
  EXPECT_EQ(pairs.trained_pairs(), 9u);
}

TEST(CollectTrainingPairs, FeaturesReproduceTheTargetLogits) {
  auto target = byte_target();
  Corpus c = synthetic_corpus(2, 300);
  TrainingPairs pairs = collect_training_pairs(*target, c, DataMode::kFixedDataset);
  const TrainingSequence& seq = pairs.sequences[0];
  const std::size_t n = seq.tokens.size();
  ForwardResult r = forward(*target, seq.tokens, iota_positions(n), AttentionMask::causal(n), nullptr);
  Tensor logits = lm_head(*target, Tensor({n, pairs.hidden}, seq.features));
  for (std::size_t i = 0; i < logits.numel(); ++i) ASSERT_NEAR(logits.data()[i], r.logits.data()[i], 1e-6);
  EXPECT_EQ(collect_training_pairs(*target, c, DataMode::kFixedDataset).sequences.back().features,
            pairs.sequences.back().features);
}

TEST(CollectTrainingPairs, LongSequencesSplitWithOverlapUsedOnce) {
  auto target = byte_target();
  Rng rng(3);
  Corpus c;
  c.sequences.push_back(testing::random_tokens(300, 256, rng));
  TrainingPairs pairs = collect_training_pairs(*target, c, DataMode::kFixedDataset);
  ASSERT_EQ(pairs.sequences.size(), 3u);
  EXPECT_EQ(pairs.trained_pairs(), 298u);
  EXPECT_EQ(pairs.sequences[0].first_trained, 0u);
  EXPECT_EQ(pairs.sequences[1].first_trained, kSplitOverlap - 2);
  EXPECT_EQ(pairs.sequences[1].tokens.front(), c.sequences[0][128 - kSplitOverlap]);
  EXPECT_EQ(pairs.sequences[2].tokens.back(), c.sequences[0].back());
  for (const auto& w : pairs.sequences) EXPECT_LE(w.tokens.size(), target->config.max_positions);
}

TEST(CollectTrainingPairs, GeneratedModeKeepsThePromptAndFollowsTheTarget) {
  auto target = byte_target();
  Corpus c = parse_corpus("{\"text\":\"the quick brown fox jumps over the dog\"}");
  TrainingPairs pairs = collect_training_pairs(*target, c, DataMode::kTargetGenerated, 8);
  const auto& got = pairs.sequences[0].tokens;
  ASSERT_EQ(got.size(), c.sequences[0].size());
  const std::vector<TokenId> prompt(c.sequences[0].begin(), c.sequences[0].begin() + 8);
  EXPECT_EQ(std::vector<TokenId>(got.begin(), got.begin() + 8), prompt);
  GenerationParams params;
  params.max_new_tokens = got.size() - 8;
  EXPECT_EQ(std::vector<TokenId>(got.begin() + 8, got.end()), generate(target, nullptr, prompt, params).tokens);
}

TEST(AugmentFeatures, ZeroIsIdentityAndNoiseIsBounded) {
  Rng rng(1);
  Tensor f({4, 8}, std::vector<real>(32, 0.5f));
  EXPECT_EQ(augment_features(f, 0, rng).data()[7], 0.5f);
  Tensor g = augment_features(f, 0.1f, rng);
  bool changed = false;
  for (std::size_t i = 0; i < 32; ++i) {
    EXPECT_LE(std::abs(g.data()[i] - 0.5f), 0.1f + 1e-7f);
    changed |= g.data()[i] != 0.5f;
  }
  EXPECT_TRUE(changed);
  EXPECT_EQ(f.data()[0], 0.5f);
  EXPECT_THROW(augment_features(f, -1, rng), UsageError);
}

TEST(AugmentFeatures, NoiseHasZeroMean) {
  Rng rng(2);
  Tensor z = Tensor::zeros({1000, 1000});
  Tensor n = augment_features(z, 0.1f, rng);
  double sum = 0;
  for (real v : n.data()) sum += v;
  EXPECT_LT(std::abs(sum / 1e6), 1e-3);
}

TEST(DraftBatch, NoiseOnlyTouchesInputs) {
  auto target = byte_target();
  TrainingPairs pairs = collect_training_pairs(*target, synthetic_corpus(3, 200), DataMode::kFixedDataset);
  const TrainingSequence& seq = pairs.sequences[0];
  Rng rng(4);
  DraftBatch clean = build_draft_batch(DraftInputMode::kFeatureShiftedToken, seq, pairs.hidden, 0.1f, nullptr);
  DraftBatch noisy = build_draft_batch(DraftInputMode::kFeatureShiftedToken, seq, pairs.hidden, 0.1f, &rng);
  EXPECT_TRUE(std::equal(clean.targets.data().begin(), clean.targets.data().end(), noisy.targets.data().begin()));
  EXPECT_FALSE(std::equal(clean.inputs.data().begin(), clean.inputs.data().end(), noisy.inputs.data().begin()));
  EXPECT_EQ(clean.tokens, noisy.tokens);
  EXPECT_EQ(clean.tokens[0], seq.tokens[1]);
  EXPECT_EQ(build_draft_batch(DraftInputMode::kFeatureUnshiftedToken, seq, pairs.hidden, 0, nullptr).tokens[0],
            seq.tokens[0]);
  EXPECT_TRUE(build_draft_batch(DraftInputMode::kFeatureOnly, seq, pairs.hidden, 0, nullptr).tokens.empty());
}

TEST(CombinedLoss, AtTheOptimumEqualsWeightedEntropy) {
  Rng rng(5);
  const std::size_t h = 6, v = 5, rows = 3;
  std::vector<real> fd(rows * h), wd(h * v);
  for (real& x : fd) x = static_cast<real>(rng.normal());
  for (real& x : wd) x = static_cast<real>(rng.normal());
  Tensor f({rows, h}, fd), w({h, v}, wd);
  Tensor p = target_distribution(f, w);
  double entropy = 0;
  for (real x : p.data()) entropy -= x * std::log(x);
  entropy /= rows;
  LossParts at = combined_loss(f, f, p, w);
  EXPECT_EQ(at.l_reg, 0.0);
  EXPECT_NEAR(at.total.item(), 0.1 * entropy, 1e-6);

  Tensor g({rows, h}, std::vector<real>(rows * h, 0.3f));
  LossParts off = combined_loss(g, f, p, w, 0);
  EXPECT_NEAR(off.total.item(), smooth_l1(g, f).item(), 1e-7);
  EXPECT_GE(combined_loss(g, f, p, w).total.item(), 0);
  EXPECT_THROW(combined_loss(Tensor::zeros({2, h}), f, p, w), DimensionError);
}

TEST(CombinedLoss, FrozenTensorsGetNoGradient) {
  auto target = byte_target();
  TrainingPairs pairs = collect_training_pairs(*target, synthetic_corpus(6, 200), DataMode::kFixedDataset);
  DraftHeadWeights head = init_draft_head(*target, DraftInputMode::kFeatureShiftedToken, 1);
  head.set_requires_grad(true);
  Rng rng(1);
  LossParts l = sequence_loss(head, pairs.sequences[0], pairs.hidden, 0.1f, &rng, 0.1f);
  backward(l.total);
  EXPECT_FALSE(head.embedding.has_grad());
  EXPECT_FALSE(head.lm_head.has_grad());
  EXPECT_TRUE(head.fc.has_grad());
  EXPECT_TRUE(head.block.wq.has_grad());
}

TrainingPairs small_pairs(const TransformerWeights& target) {
  return collect_training_pairs(target, synthetic_corpus(7, 1500), DataMode::kFixedDataset);
}

TEST(TrainDraftHead, ReducesLossDeterministically) {
  auto target = byte_target();
  TrainingPairs pairs = small_pairs(*target);
  TrainConfig config;
  config.lr = 3e-3f;
  config.epochs = 3;
  config.batch_size = 4;
  DraftTrainResult a = train_draft_head(*target, pairs, DraftInputMode::kFeatureShiftedToken, config);
  EXPECT_LT(a.final_loss, a.initial_loss);
  EXPECT_EQ(a.epoch_loss.size(), 3u);
  EXPECT_TRUE(frozen_tensors_match(*a.head, *target));
  DraftTrainResult b = train_draft_head(*target, pairs, DraftInputMode::kFeatureShiftedToken, config);
  EXPECT_EQ(curve_csv(a.curve), curve_csv(b.curve));
  EXPECT_EQ(curve_csv(a.curve).rfind("epoch,step,l_reg,l_cls,l_total\n", 0), 0u);
  EXPECT_EQ(a.curve.size(), 3 * ((pairs.sequences.size() + 3) / 4));
}

TEST(TrainDraftHead, NonFiniteLossAborts) {
  auto target = byte_target();
  TrainingPairs pairs = small_pairs(*target);
  pairs.sequences[0].features[5] = std::numeric_limits<real>::quiet_NaN();
  TrainConfig config;
  config.epochs = 1;
  config.batch_size = 1000;
  EXPECT_THROW(train_draft_head(*target, pairs, DraftInputMode::kFeatureShiftedToken, config), DivergenceError);
}

TEST(TrainConfig, StrictJson) {
  TrainConfig c;
  c.lr = 1e-3f;
  c.data_mode = DataMode::kTargetGenerated;
  TrainConfig back = TrainConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_THROW(TrainConfig::from_json({{"learning_rate", 1}}), ValidationError);
  EXPECT_THROW(TrainConfig::from_json({{"lr", "fast"}}), ValidationError);
  EXPECT_THROW(TrainConfig::from_json({{"lr", -1}}), ValidationError);
  EXPECT_THROW(TrainConfig::from_json({{"data_mode", "other"}}), ValidationError);
  EXPECT_EQ(TrainConfig::from_json(nlohmann::json::object()).lr, 3e-5f);
  EXPECT_THROW(TargetTrainConfig::from_json({{"epoch", 1}}), ValidationError);
}

TEST(TrainTargetToy, LearnsTheGrammar) {
  Corpus c = synthetic_corpus(8, 6000);
  auto [train, held] = split_corpus(c, 0.2);
  TargetTrainConfig config;
  config.epochs = 3;
  config.lr = 3e-3f;
  TargetTrainResult r = train_target_toy(train, byte_config(), config);
  ASSERT_EQ(r.epoch_loss.size(), 3u);
  for (std::size_t e = 1; e < 3; ++e) EXPECT_LE(r.epoch_loss[e], r.epoch_loss[e - 1] * 1.01);
  const TargetEval eval = evaluate_target(*r.weights, held);
  EXPECT_LT(eval.perplexity, 256.0 / 2);
  TargetTrainResult again = train_target_toy(train, byte_config(), config);
  EXPECT_EQ(weights_hash(r.weights->named()), weights_hash(again.weights->named()));
  EXPECT_EQ(target_curve_csv(r.curve), target_curve_csv(again.curve));
}

}  // namespace
}  // namespace eaglet
