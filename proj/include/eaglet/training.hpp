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
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "eaglet/corpus.hpp"
#include "eaglet/draft_head.hpp"
#include "eaglet/model.hpp"
#include "eaglet/real.hpp"
#include "eaglet/rng.hpp"
#include "eaglet/tensor.hpp"
#include "json.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

enum class DataMode { kFixedDataset, kTargetGenerated };

std::string data_mode_name(DataMode mode);
DataMode parse_data_mode(const std::string& text);

// Tokens beyond max_positions are split into windows that overlap by this
// many tokens.
inline constexpr std::size_t kSplitOverlap = 16;

// One teacher-forced window. features[k] is the target feature after
// tokens[0..k]. Pair k = (features[k], tokens[k + 1]) predicts features[k + 1]
// and the target distribution softmax(LM head(features[k + 1])) over
// tokens[k + 2], so a window of n tokens has n - 2 pairs. Pairs before
// first_trained were already covered by the previous window.
struct TrainingSequence {
  std::vector<TokenId> tokens;
  std::vector<real> features;  // [n, H]
  std::size_t first_trained = 0;

  std::size_t pair_count() const { return tokens.size() >= 2 ? tokens.size() - 2 : 0; }
  std::size_t trained_pairs() const { return pair_count() > first_trained ? pair_count() - first_trained : 0; }
};

struct TrainingPairs {
  std::size_t hidden = 0;
  std::vector<TrainingSequence> sequences;

  std::size_t trained_pairs() const;
};

// fixed_dataset: teacher-forced forwards over the corpus. target_generated:
// each sequence keeps its first `prompt_prefix` tokens and the rest is
// replaced by the target's greedy continuation of the same length.
TrainingPairs collect_training_pairs(const TransformerWeights& target, const Corpus& corpus, DataMode mode,
                                     std::size_t prompt_prefix = 16);

// Adds i.i.d. U(-magnitude, magnitude) noise to every element.
Tensor augment_features(const Tensor& features, real magnitude, Rng& rng);

struct TrainConfig {
  real lr = 3e-5f;
  real beta1 = 0.9f;
  real beta2 = 0.95f;
  real weight_decay = 0.0f;
  real grad_clip = 0.5f;
  real noise = 0.1f;
  real w_cls = 0.1f;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  DataMode data_mode = DataMode::kFixedDataset;

  // Throws ValidationError.
  void validate() const;
  nlohmann::json to_json() const;
  // Strict: unknown keys raise ValidationError; absent keys keep defaults.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct LossParts {
  Tensor total;
  double l_reg = 0;
  double l_cls = 0;
};

// smooth_l1(predicted, target_features) + w_cls * CE(target_dist, LM head(predicted)).
LossParts combined_loss(const Tensor& predicted, const Tensor& target_features, const Tensor& target_dist,
                        const Tensor& lm_head, real w_cls = 0.1f);

// softmax(target_features x lm_head) with no gradient.
Tensor target_distribution(const Tensor& target_features, const Tensor& lm_head);

// Head inputs and regression targets for one window. Noise touches only the
// inputs.
struct DraftBatch {
  Tensor inputs;  // [m, H] features 0..m-1, possibly augmented
  std::vector<TokenId> tokens;  // paired tokens, empty for feature-only heads
  Tensor targets;  // [m, H] features 1..m
};

DraftBatch build_draft_batch(DraftInputMode mode, const TrainingSequence& seq, std::size_t hidden, real noise,
                             Rng* noise_rng);

// Combined loss over the trained pairs of one window. noise_rng may be null
// (no augmentation).
LossParts sequence_loss(const DraftHeadWeights& head, const TrainingSequence& seq, std::size_t hidden, real noise,
                        Rng* noise_rng, real w_cls);

struct CurveRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double l_reg = 0;
  double l_cls = 0;
  double l_total = 0;
};

std::string curve_csv(const std::vector<CurveRow>& curve);

struct DraftTrainResult {
  std::shared_ptr<DraftHeadWeights> head;
  std::vector<CurveRow> curve;  // one row per optimizer step
  std::vector<double> epoch_loss;  // mean total loss per epoch
  double initial_loss = 0;  // clean loss before the first step
  double final_loss = 0;  // clean loss after the last step
};

// Pair-weighted mean of the clean combined loss.
LossParts evaluate_draft_loss(const DraftHeadWeights& head, const TrainingPairs& pairs, real w_cls = 0.1f);

// Throws DivergenceError on a non-finite loss.
DraftTrainResult train_draft_head(const TransformerWeights& target, const TrainingPairs& pairs, DraftInputMode mode,
                                  const TrainConfig& config);

struct TargetTrainConfig {
  real lr = 3e-3f;
  real beta1 = 0.9f;
  real beta2 = 0.95f;
  real weight_decay = 0.0f;
  real grad_clip = 1.0f;
  std::size_t epochs = 4;
  std::size_t batch_size = 8;
  std::size_t window = 128;
  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TargetTrainConfig from_json(const nlohmann::json& j);
};

struct TargetCurveRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0;
};

struct TargetTrainResult {
  std::shared_ptr<TransformerWeights> weights;
  std::vector<TargetCurveRow> curve;
  std::vector<double> epoch_loss;
};

// Next-token cross-entropy training of a fresh target. Throws
// DivergenceError on a non-finite loss.
TargetTrainResult train_target_toy(const Corpus& corpus, const ModelConfig& model, const TargetTrainConfig& config);

std::string target_curve_csv(const std::vector<TargetCurveRow>& curve);

struct TargetEval {
  double mean_loss = 0;  // nats per predicted token
  double perplexity = 0;
  double mean_entropy = 0;  // nats, of the predicted distributions
};

TargetEval evaluate_target(const TransformerWeights& target, const Corpus& corpus);

}  // namespace EAGLET_ABI
}  // namespace eaglet
