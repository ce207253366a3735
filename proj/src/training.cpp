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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "eaglet/checkpoint.hpp"
#include "eaglet/engine.hpp"
#include "eaglet/errors.hpp"
#include "eaglet/ops.hpp"
#include "eaglet/optim.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

std::string data_mode_name(DataMode mode) {
  return mode == DataMode::kFixedDataset ? "fixed_dataset" : "target_generated";
}

DataMode parse_data_mode(const std::string& text) {
  if (text == "fixed_dataset") return DataMode::kFixedDataset;
  if (text == "target_generated") return DataMode::kTargetGenerated;
  throw ValidationError("unknown data mode \"" + text + "\" (expected fixed_dataset or target_generated)");
}

std::size_t TrainingPairs::trained_pairs() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.trained_pairs();
  return n;
}

namespace {

std::vector<std::int64_t> iota_positions(std::size_t n) {
  std::vector<std::int64_t> p(n);
  std::iota(p.begin(), p.end(), std::int64_t{0});
  return p;
}

std::vector<real> teacher_forced_features(const TransformerWeights& target, std::span<const TokenId> tokens) {
  NoGradGuard guard;
  ForwardResult r = forward(target, tokens, iota_positions(tokens.size()), AttentionMask::causal(tokens.size()), nullptr);
  return {r.features.data().begin(), r.features.data().end()};
}

void check_finite(double loss, std::size_t epoch, std::size_t step, const char* what) {
  if (!std::isfinite(loss)) {
    throw DivergenceError(std::string(what) + " diverged: loss " + std::to_string(loss) + " at epoch " +
                          std::to_string(epoch) + ", step " + std::to_string(step) +
                          "; lower the learning rate or the gradient clip");
  }
}

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(what + ": bad value for \"" + key + "\": " + e.what());
  }
}

}  // namespace

TrainingPairs collect_training_pairs(const TransformerWeights& target, const Corpus& corpus, DataMode mode,
                                     std::size_t prompt_prefix) {
  corpus.validate(target.config.vocab_size);
  TrainingPairs pairs;
  pairs.hidden = target.config.hidden_dim;
  const std::size_t window = target.config.max_positions;
  std::shared_ptr<const TransformerWeights> shared(&target, [](const TransformerWeights*) {});
  for (const auto& original : corpus.sequences) {
    std::vector<TokenId> seq = original;
    if (mode == DataMode::kTargetGenerated && seq.size() >= 2) {
      const std::size_t keep = std::min(std::max<std::size_t>(prompt_prefix, 1), seq.size() - 1);
      GenerationParams params;
      params.max_new_tokens = seq.size() - keep;
      GenerationResult g = generate(shared, nullptr, std::span(seq).first(keep), params);
      seq.resize(keep);
      seq.insert(seq.end(), g.tokens.begin(), g.tokens.end());
    }
    if (seq.size() <= window) {
      pairs.sequences.push_back({seq, teacher_forced_features(target, seq), 0});
      continue;
    }
    std::size_t start = 0;
    std::size_t covered = 0;  // global pair index up to which training is done
    while (true) {
      const std::size_t end = std::min(start + window, seq.size());
      TrainingSequence w;
      w.tokens.assign(seq.begin() + static_cast<std::ptrdiff_t>(start), seq.begin() + static_cast<std::ptrdiff_t>(end));
      w.features = teacher_forced_features(target, w.tokens);
      w.first_trained = covered - start;
      pairs.sequences.push_back(std::move(w));
      covered = end - 2;
      if (end == seq.size()) break;
      start = end - kSplitOverlap;
    }
  }
  return pairs;
}

Tensor augment_features(const Tensor& features, real magnitude, Rng& rng) {
  if (magnitude < 0) throw UsageError("noise magnitude must be >= 0");
  std::vector<real> out(features.data().begin(), features.data().end());
  if (magnitude > 0) {
    for (real& v : out) v += static_cast<real>(rng.uniform(-magnitude, magnitude));
  }
  return Tensor(features.shape(), std::move(out));
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ValidationError("train config: lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ValidationError("train config: betas in [0, 1)");
  if (!(weight_decay >= 0)) throw ValidationError("train config: weight_decay must be >= 0");
  if (!(grad_clip > 0)) throw ValidationError("train config: grad_clip must be > 0");
  if (!(noise >= 0)) throw ValidationError("train config: noise must be >= 0");
  if (!(w_cls >= 0)) throw ValidationError("train config: w_cls must be >= 0");
  if (epochs == 0 || batch_size == 0) throw ValidationError("train config: epochs and batch_size must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", lr},         {"betas", {beta1, beta2}}, {"weight_decay", weight_decay}, {"grad_clip", grad_clip},
          {"noise", noise},   {"w_cls", w_cls},          {"epochs", epochs},             {"batch_size", batch_size},
          {"seed", seed},     {"data_mode", data_mode_name(data_mode)}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  const std::string what = "draft train config";
  reject_unknown_keys(j, {"lr", "betas", "weight_decay", "grad_clip", "noise", "w_cls", "epochs", "batch_size", "seed",
                          "data_mode"},
                      what);
  TrainConfig c;
  read_key(j, "lr", c.lr, what);
  if (j.contains("betas")) {
    std::vector<real> b;
    read_key(j, "betas", b, what);
    if (b.size() != 2) throw ValidationError(what + ": betas must have two entries");
    c.beta1 = b[0];
    c.beta2 = b[1];
  }
  read_key(j, "weight_decay", c.weight_decay, what);
  read_key(j, "grad_clip", c.grad_clip, what);
  read_key(j, "noise", c.noise, what);
  read_key(j, "w_cls", c.w_cls, what);
  read_key(j, "epochs", c.epochs, what);
  read_key(j, "batch_size", c.batch_size, what);
  read_key(j, "seed", c.seed, what);
  std::string mode = data_mode_name(c.data_mode);
  read_key(j, "data_mode", mode, what);
  c.data_mode = parse_data_mode(mode);
  c.validate();
  return c;
}

Tensor target_distribution(const Tensor& target_features, const Tensor& lm_head) {
  NoGradGuard guard;
  return softmax(matmul(target_features, lm_head));
}

LossParts combined_loss(const Tensor& predicted, const Tensor& target_features, const Tensor& target_dist,
                        const Tensor& lm_head, real w_cls) {
  if (predicted.shape() != target_features.shape()) {
    throw DimensionError("combined_loss: predicted " + shape_str(predicted.shape()) + " vs target " +
                         shape_str(target_features.shape()));
  }
  LossParts out;
  Tensor reg = smooth_l1(predicted, target_features);
  Tensor cls = soft_cross_entropy(target_dist, matmul(predicted, lm_head));
  out.l_reg = reg.item();
  out.l_cls = cls.item();
  out.total = add(reg, scale(cls, w_cls));
  return out;
}

DraftBatch build_draft_batch(DraftInputMode mode, const TrainingSequence& seq, std::size_t hidden, real noise,
                             Rng* noise_rng) {
  const std::size_t m = seq.pair_count();
  if (seq.features.size() != seq.tokens.size() * hidden) throw DimensionError("draft batch: feature buffer size");
  const auto all = std::span(seq.features);
  DraftBatch batch;
  batch.inputs = Tensor({m, hidden}, std::vector<real>(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m * hidden)));
  if (noise_rng) batch.inputs = augment_features(batch.inputs, noise, *noise_rng);
  batch.targets = Tensor({m, hidden}, std::vector<real>(all.begin() + static_cast<std::ptrdiff_t>(hidden),
                                                       all.begin() + static_cast<std::ptrdiff_t>((m + 1) * hidden)));
  if (mode_uses_tokens(mode)) {
    for (std::size_t k = 0; k < m; ++k) batch.tokens.push_back(paired_token(mode, seq.tokens, k));
  }
  return batch;
}

LossParts sequence_loss(const DraftHeadWeights& head, const TrainingSequence& seq, std::size_t hidden, real noise,
                        Rng* noise_rng, real w_cls) {
  if (seq.trained_pairs() == 0) throw UsageError("sequence_loss: window has no trained pairs");
  const std::size_t m = seq.pair_count();
  DraftBatch batch = build_draft_batch(head.mode, seq, hidden, noise, noise_rng);
  Tensor predicted =
      draft_forward(head, batch.inputs, batch.tokens, iota_positions(m), AttentionMask::causal(m), nullptr);
  Tensor targets = batch.targets;
  if (seq.first_trained > 0) {
    predicted = slice_rows(predicted, seq.first_trained, m);
    targets = slice_rows(targets, seq.first_trained, m);
  }
  return combined_loss(predicted, targets, target_distribution(targets, head.lm_head), head.lm_head, w_cls);
}

std::string curve_csv(const std::vector<CurveRow>& curve) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,step,l_reg,l_cls,l_total\n";
  for (const CurveRow& r : curve) out << r.epoch << ',' << r.step << ',' << r.l_reg << ',' << r.l_cls << ',' << r.l_total << '\n';
  return out.str();
}

LossParts evaluate_draft_loss(const DraftHeadWeights& head, const TrainingPairs& pairs, real w_cls) {
  NoGradGuard guard;
  LossParts out;
  double total = 0;
  std::size_t count = 0;
  for (const TrainingSequence& seq : pairs.sequences) {
    const std::size_t n = seq.trained_pairs();
    if (n == 0) continue;
    LossParts l = sequence_loss(head, seq, pairs.hidden, 0, nullptr, w_cls);
    out.l_reg += l.l_reg * static_cast<double>(n);
    out.l_cls += l.l_cls * static_cast<double>(n);
    total += l.total.item() * static_cast<double>(n);
    count += n;
  }
  if (count == 0) throw UsageError("evaluate_draft_loss: no trained pairs");
  out.l_reg /= static_cast<double>(count);
  out.l_cls /= static_cast<double>(count);
  out.total = Tensor::scalar(static_cast<real>(total / static_cast<double>(count)));
  return out;
}

DraftTrainResult train_draft_head(const TransformerWeights& target, const TrainingPairs& pairs, DraftInputMode mode,
                                  const TrainConfig& config) {
  config.validate();
  if (pairs.hidden != target.config.hidden_dim) throw DimensionError("training pairs do not match the target width");
  if (pairs.trained_pairs() == 0) throw ValidationError("no training pairs; the corpus is too short");
  DraftTrainResult result;
  result.head = std::make_shared<DraftHeadWeights>(init_draft_head(target, mode, config.seed));
  DraftHeadWeights& head = *result.head;
  result.initial_loss = evaluate_draft_loss(head, pairs, config.w_cls).total.item();

  head.set_requires_grad(true);
  AdamWOptions opt;
  opt.lr = config.lr;
  opt.beta1 = config.beta1;
  opt.beta2 = config.beta2;
  opt.weight_decay = config.weight_decay;
  AdamW optimizer(head.parameters(), opt);

  Rng rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pairs.sequences.size(); ++i) {
    if (pairs.sequences[i].trained_pairs() > 0) order.push_back(i);
  }
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_sum = 0;
    std::size_t epoch_pairs = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      std::size_t batch_pairs = 0;
      for (std::size_t i = b; i < e; ++i) batch_pairs += pairs.sequences[order[i]].trained_pairs();
      optimizer.zero_grad();
      Tensor loss;
      CurveRow row{epoch, step, 0, 0, 0};
      for (std::size_t i = b; i < e; ++i) {
        const TrainingSequence& seq = pairs.sequences[order[i]];
        const double w = static_cast<double>(seq.trained_pairs()) / static_cast<double>(batch_pairs);
        LossParts l = sequence_loss(head, seq, pairs.hidden, config.noise, &rng, config.w_cls);
        Tensor weighted = scale(l.total, static_cast<real>(w));
        loss = loss.defined() ? add(loss, weighted) : weighted;
        row.l_reg += w * l.l_reg;
        row.l_cls += w * l.l_cls;
      }
      row.l_total = loss.item();
      check_finite(row.l_total, epoch, step, "draft head training");
      backward(loss);
      clip_grad_norm(optimizer.params(), config.grad_clip);
      optimizer.step();
      result.curve.push_back(row);
      epoch_sum += row.l_total * static_cast<double>(batch_pairs);
      epoch_pairs += batch_pairs;
      ++step;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_pairs));
  }
  head.set_requires_grad(false);
  result.final_loss = evaluate_draft_loss(head, pairs, config.w_cls).total.item();
  check_finite(result.final_loss, config.epochs, step, "draft head training");
  return result;
}

void TargetTrainConfig::validate() const {
  if (!(lr > 0)) throw ValidationError("target train config: lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) {
    throw ValidationError("target train config: betas in [0, 1)");
  }
  if (!(weight_decay >= 0) || !(grad_clip > 0)) throw ValidationError("target train config: bad decay or clip");
  if (epochs == 0 || batch_size == 0 || window < 2) {
    throw ValidationError("target train config: epochs, batch_size >= 1 and window >= 2");
  }
}

nlohmann::json TargetTrainConfig::to_json() const {
  return {{"lr", lr},         {"betas", {beta1, beta2}}, {"weight_decay", weight_decay},
          {"grad_clip", grad_clip}, {"epochs", epochs}, {"batch_size", batch_size},
          {"window", window}, {"seed", seed}};
}

TargetTrainConfig TargetTrainConfig::from_json(const nlohmann::json& j) {
  const std::string what = "target train config";
  reject_unknown_keys(j, {"lr", "betas", "weight_decay", "grad_clip", "epochs", "batch_size", "window", "seed"}, what);
  TargetTrainConfig c;
  read_key(j, "lr", c.lr, what);
  if (j.contains("betas")) {
    std::vector<real> b;
    read_key(j, "betas", b, what);
    if (b.size() != 2) throw ValidationError(what + ": betas must have two entries");
    c.beta1 = b[0];
    c.beta2 = b[1];
  }
  read_key(j, "weight_decay", c.weight_decay, what);
  read_key(j, "grad_clip", c.grad_clip, what);
  read_key(j, "epochs", c.epochs, what);
  read_key(j, "batch_size", c.batch_size, what);
  read_key(j, "window", c.window, what);
  read_key(j, "seed", c.seed, what);
  c.validate();
  return c;
}

namespace {

std::vector<std::vector<TokenId>> training_windows(const Corpus& corpus, std::size_t window) {
  std::vector<std::vector<TokenId>> out;
  for (const auto& seq : corpus.sequences) {
    for (std::size_t s = 0; s + 1 < seq.size(); s += window) {
      const std::size_t e = std::min(seq.size(), s + window);
      out.emplace_back(seq.begin() + static_cast<std::ptrdiff_t>(s), seq.begin() + static_cast<std::ptrdiff_t>(e));
    }
  }
  return out;
}

Tensor window_loss(const TransformerWeights& w, const std::vector<TokenId>& tokens) {
  const std::size_t n = tokens.size() - 1;
  ForwardResult r = forward(w, std::span(tokens).first(n), iota_positions(n), AttentionMask::causal(n), nullptr);
  return cross_entropy(r.logits, std::span(tokens).subspan(1));
}

}  // namespace

TargetTrainResult train_target_toy(const Corpus& corpus, const ModelConfig& model, const TargetTrainConfig& config) {
  config.validate();
  model.validate();
  corpus.validate(model.vocab_size);
  const std::size_t window = std::min(config.window, model.max_positions + 1);
  auto windows = training_windows(corpus, window);
  if (windows.empty()) throw ValidationError("corpus has no sequence of two or more tokens");

  TargetTrainResult result;
  result.weights = std::make_shared<TransformerWeights>(init_target(model));
  TransformerWeights& w = *result.weights;
  w.set_requires_grad(true);
  AdamWOptions opt;
  opt.lr = config.lr;
  opt.beta1 = config.beta1;
  opt.beta2 = config.beta2;
  opt.weight_decay = config.weight_decay;
  AdamW optimizer(w.parameters(), opt);

  Rng rng(config.seed);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, rng);
    double epoch_sum = 0;
    std::size_t epoch_tokens = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      std::size_t batch_tokens = 0;
      for (std::size_t i = b; i < e; ++i) batch_tokens += windows[order[i]].size() - 1;
      optimizer.zero_grad();
      Tensor loss;
      for (std::size_t i = b; i < e; ++i) {
        const auto& win = windows[order[i]];
        const real weight = static_cast<real>(win.size() - 1) / static_cast<real>(batch_tokens);
        Tensor l = scale(window_loss(w, win), weight);
        loss = loss.defined() ? add(loss, l) : l;
      }
      const double value = loss.item();
      check_finite(value, epoch, step, "target training");
      backward(loss);
      clip_grad_norm(optimizer.params(), config.grad_clip);
      optimizer.step();
      result.curve.push_back({epoch, step, value});
      epoch_sum += value * static_cast<double>(batch_tokens);
      epoch_tokens += batch_tokens;
      ++step;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_tokens));
  }
  w.set_requires_grad(false);
  return result;
}

std::string target_curve_csv(const std::vector<TargetCurveRow>& curve) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,step,loss\n";
  for (const TargetCurveRow& r : curve) out << r.epoch << ',' << r.step << ',' << r.loss << '\n';
  return out.str();
}

TargetEval evaluate_target(const TransformerWeights& target, const Corpus& corpus) {
  corpus.validate(target.config.vocab_size);
  NoGradGuard guard;
  double loss = 0, entropy = 0;
  std::size_t count = 0;
  for (const auto& win : training_windows(corpus, target.config.max_positions + 1)) {
    const std::size_t n = win.size() - 1;
    ForwardResult r = forward(target, std::span(win).first(n), iota_positions(n), AttentionMask::causal(n), nullptr);
    loss += cross_entropy(r.logits, std::span(win).subspan(1)).item() * static_cast<double>(n);
    Tensor p = softmax(r.logits);
    for (real v : p.data()) {
      if (v > 0) entropy -= static_cast<double>(v) * std::log(static_cast<double>(v));
    }
    count += n;
  }
  if (count == 0) throw UsageError("evaluate_target: corpus has no predicted tokens");
  TargetEval out;
  out.mean_loss = loss / static_cast<double>(count);
  out.perplexity = std::exp(out.mean_loss);
  out.mean_entropy = entropy / static_cast<double>(count);
  return out;
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
