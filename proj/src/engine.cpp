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

#include "eaglet/engine.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "eaglet/errors.hpp"
#include "eaglet/ops.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

std::string decode_mode_name(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kVanilla:
      return "vanilla";
    case DecodeMode::kChain:
      return "chain";
    case DecodeMode::kTree:
      return "tree";
  }
  throw UsageError("unknown decode mode");
}

DecodeMode parse_decode_mode(const std::string& text) {
  if (text == "vanilla") return DecodeMode::kVanilla;
  if (text == "chain") return DecodeMode::kChain;
  if (text == "tree") return DecodeMode::kTree;
  throw ValidationError("unknown mode \"" + text + "\" (expected vanilla, chain or tree)");
}

void GenerationParams::validate() const {
  if (max_new_tokens == 0) throw UsageError("max_new_tokens must be >= 1");
  if (!(temperature >= 0)) throw UsageError("temperature must be >= 0");
  if (mode == DecodeMode::kChain && gamma == 0) throw UsageError("chain mode needs gamma >= 1");
  if (mode == DecodeMode::kTree) {
    try {
      topology.validate();
    } catch (const ValidationError& e) {
      throw UsageError(e.what());
    }
  }
}

nlohmann::json RunLog::to_json() const {
  nlohmann::json rounds_json = nlohmann::json::array();
  for (const RoundRecord& r : rounds) {
    rounds_json.push_back({{"round", r.round},
                           {"prefill", r.prefill},
                           {"offered", r.offered},
                           {"accepted", r.accepted},
                           {"accepted_tokens", r.accepted_tokens},
                           {"bonus", r.bonus},
                           {"target_forwards", r.target_forwards},
                           {"draft_forwards", r.draft_forwards}});
  }
  const ForwardCounts counts = count_forwards(*this);
  return {{"schema_version", kSchemaVersion},
          {"mode", mode},
          {"drafter", drafter},
          {"temperature", temperature},
          {"seed", seed},
          {"prompt_length", prompt_length},
          {"max_new_tokens", max_new_tokens},
          {"tokens_emitted", tokens_emitted},
          {"tokens_returned", tokens_returned},
          {"truncated", truncated},
          {"truncation_reason", truncation_reason},
          {"walltime_seconds", walltime_seconds},
          {"target_forwards", counts.target},
          {"draft_forwards", counts.draft},
          {"rounds", rounds_json}};
}

RunLog RunLog::from_json(const nlohmann::json& j) {
  RunLog log;
  if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion) {
    throw ValidationError("run log: unsupported schema_version " + j.at("schema_version").dump());
  }
  log.mode = j.at("mode").get<std::string>();
  log.drafter = j.at("drafter").get<std::string>();
  log.temperature = j.at("temperature").get<real>();
  log.seed = j.at("seed").get<std::uint64_t>();
  log.prompt_length = j.at("prompt_length").get<std::size_t>();
  log.max_new_tokens = j.at("max_new_tokens").get<std::size_t>();
  log.tokens_emitted = j.at("tokens_emitted").get<std::size_t>();
  log.tokens_returned = j.at("tokens_returned").get<std::size_t>();
  log.truncated = j.at("truncated").get<bool>();
  log.truncation_reason = j.at("truncation_reason").get<std::string>();
  log.walltime_seconds = j.at("walltime_seconds").get<double>();
  for (const auto& r : j.at("rounds")) {
    RoundRecord rec;
    rec.round = r.at("round").get<std::size_t>();
    rec.prefill = r.at("prefill").get<bool>();
    rec.offered = r.at("offered").get<std::size_t>();
    rec.accepted = r.at("accepted").get<std::size_t>();
    rec.accepted_tokens = r.at("accepted_tokens").get<std::vector<TokenId>>();
    rec.bonus = r.at("bonus").get<TokenId>();
    rec.target_forwards = r.at("target_forwards").get<std::uint64_t>();
    rec.draft_forwards = r.at("draft_forwards").get<std::uint64_t>();
    log.rounds.push_back(std::move(rec));
  }
  return log;
}

ForwardCounts count_forwards(const RunLog& log) {
  ForwardCounts c;
  for (const RoundRecord& r : log.rounds) {
    c.target += r.target_forwards;
    c.draft += r.draft_forwards;
  }
  return c;
}

AttentionMask verification_mask(const DraftTree& tree, std::size_t committed) {
  const AttentionMask nodes = tree_attention_mask(tree, committed + 1);
  const std::size_t n = tree.nodes.size();
  AttentionMask mask(n + 1, committed + 1 + n);
  for (std::size_t s = 0; s <= committed; ++s) mask.set(0, s);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < nodes.cols(); ++c) {
      if (nodes.allowed(i, c)) mask.set(i + 1, c);
    }
  }
  return mask;
}

Session::Session(std::shared_ptr<const TransformerWeights> target, Drafter* drafter, GenerationParams params)
    : target_(std::move(target)), drafter_(drafter), params_(std::move(params)) {
  params_.validate();
  if (params_.mode != DecodeMode::kVanilla && drafter_ == nullptr) {
    throw UsageError(decode_mode_name(params_.mode) + " mode needs a drafter");
  }
  state_.hidden = target_->config.hidden_dim;
  state_.target_cache = make_cache(*target_);
  state_.rng = Rng(params_.seed);
  if (drafter_) drafter_->reset();
  verify_options_.greedy = params_.temperature == 0;
  verify_options_.clamp_acceptance = params_.clamp_acceptance;
  log_.mode = decode_mode_name(params_.mode);
  log_.drafter = drafter_ && params_.mode != DecodeMode::kVanilla ? drafter_->name() : "none";
  log_.temperature = params_.temperature;
  log_.seed = params_.seed;
  log_.max_new_tokens = params_.max_new_tokens;
}

TokenId Session::sample_next(std::span<const real> logits) {
  if (params_.temperature == 0) return argmax(logits);
  Tensor p = softmax(Tensor({logits.size()}, std::vector<real>(logits.begin(), logits.end())), params_.temperature);
  return sample_dist(to_dist(p.data()), state_.rng);
}

std::vector<Dist> Session::target_dists(const Tensor& logits) const {
  const std::size_t rows = logits.dim(0);
  const std::size_t v = logits.dim(1);
  std::vector<Dist> out;
  out.reserve(rows);
  // Greedy verification only takes argmaxes, so raw logits serve directly.
  Tensor probs = params_.temperature > 0 ? softmax(logits, params_.temperature) : logits;
  for (std::size_t r = 0; r < rows; ++r) out.push_back(to_dist(probs.data().subspan(r * v, v)));
  return out;
}

void Session::prefill(std::span<const TokenId> prompt) {
  if (prompt.empty()) throw UsageError("prompt must not be empty");
  if (prompt.size() + 1 > target_->config.max_positions) {
    throw CapacityError("prompt of " + std::to_string(prompt.size()) + " tokens does not fit max_positions " +
                        std::to_string(target_->config.max_positions));
  }
  NoGradGuard guard;
  std::vector<std::int64_t> positions(prompt.size());
  std::iota(positions.begin(), positions.end(), 0);
  ForwardResult r = forward(*target_, prompt, positions, AttentionMask::causal(prompt.size()), &state_.target_cache);
  state_.tokens.assign(prompt.begin(), prompt.end());
  state_.features.assign(r.features.data().begin(), r.features.data().end());
  const std::size_t v = r.logits.dim(1);
  const TokenId first = sample_next(r.logits.data().subspan((prompt.size() - 1) * v, v));
  state_.tokens.push_back(first);
  prompt_length_ = prompt.size();
  log_.prompt_length = prompt.size();
  RoundRecord rec;
  rec.prefill = true;
  rec.bonus = first;
  rec.target_forwards = 1;
  log_.rounds.push_back(rec);
  log_.tokens_emitted = 1;
}

void Session::prefill_pending(std::span<const TokenId> context) {
  if (context.size() < 2) throw UsageError("prefill_pending needs at least two context tokens");
  if (context.size() > target_->config.max_positions) throw CapacityError("context does not fit max_positions");
  NoGradGuard guard;
  const std::size_t n = context.size() - 1;
  std::vector<std::int64_t> positions(n);
  std::iota(positions.begin(), positions.end(), 0);
  ForwardResult r = forward(*target_, context.first(n), positions, AttentionMask::causal(n), &state_.target_cache);
  state_.tokens.assign(context.begin(), context.end());
  state_.features.assign(r.features.data().begin(), r.features.data().end());
  prompt_length_ = context.size();
  log_.prompt_length = context.size();
}

bool Session::step() {
  if (state_.tokens.empty()) throw UsageError("step before prefill");
  return params_.mode == DecodeMode::kVanilla ? step_vanilla() : step_speculative();
}

bool Session::step_vanilla() {
  const std::size_t j = state_.feature_count();
  if (j + 1 > target_->config.max_positions) return false;
  NoGradGuard guard;
  const std::int64_t pos = static_cast<std::int64_t>(j);
  ForwardResult r = forward(*target_, std::span(state_.tokens).last(1), std::span(&pos, 1),
                            AttentionMask::causal(1, j), &state_.target_cache);
  const TokenId next = sample_next(r.logits.data());
  state_.features.insert(state_.features.end(), r.features.data().begin(), r.features.data().end());
  state_.tokens.push_back(next);
  RoundRecord rec;
  rec.round = log_.rounds.size();
  rec.bonus = next;
  rec.target_forwards = 1;
  log_.rounds.push_back(rec);
  log_.tokens_emitted += 1;
  return true;
}

bool Session::step_speculative() {
  const std::size_t j = state_.feature_count();
  const bool chain_mode = params_.mode == DecodeMode::kChain;
  const std::size_t depth = chain_mode ? params_.gamma : params_.topology.depth();
  const std::size_t nodes = chain_mode ? params_.gamma : params_.topology.budget;
  if (j + 1 + nodes > target_->config.max_positions || j + depth >= target_->config.max_positions) return false;

  const std::uint64_t draft_before = drafter_->forward_count();
  DraftTree tree;
  std::vector<Dist> chain_q;
  if (chain_mode) {
    ChainDraft chain = build_chain_draft(state_, *drafter_, params_.gamma, params_.temperature);
    for (const auto& q : chain.dists) chain_q.push_back(to_dist(q));
    tree = chain_as_tree(chain, state_.committed());
  } else {
    tree = build_tree_draft(state_, *drafter_, params_.topology, params_.temperature);
  }
  const std::uint64_t draft_forwards = drafter_->forward_count() - draft_before;

  NoGradGuard guard;
  LinearizedTree lin = linearize_tree(tree);
  std::vector<TokenId> tokens{state_.tokens.back()};
  tokens.insert(tokens.end(), lin.tokens.begin(), lin.tokens.end());
  std::vector<std::int64_t> positions{static_cast<std::int64_t>(j)};
  positions.insert(positions.end(), lin.positions.begin(), lin.positions.end());
  ForwardResult r = forward(*target_, tokens, positions, verification_mask(tree, j), &state_.target_cache);

  std::vector<Dist> P = target_dists(r.logits);
  AcceptanceOutcome outcome;
  if (chain_mode) {
    outcome = verify_chain(P, chain_q, lin.tokens, state_.rng, verify_options_);
  } else {
    std::vector<Dist> node_targets(P.begin() + 1, P.end());
    outcome = verify_tree(tree, P[0], node_targets, state_.rng, verify_options_);
  }

  std::vector<std::size_t> keep(j + 1);
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  for (int node : outcome.path) keep.push_back(j + 1 + static_cast<std::size_t>(node));
  state_.target_cache.prune(keep);
  record_accepted_features(state_, outcome, r.features);

  RoundRecord rec;
  rec.round = log_.rounds.size();
  rec.offered = outcome.offered;
  rec.accepted = outcome.accepted.size();
  rec.accepted_tokens = outcome.accepted;
  rec.bonus = outcome.bonus;
  rec.target_forwards = 1;
  rec.draft_forwards = draft_forwards;
  log_.rounds.push_back(rec);
  log_.tokens_emitted += outcome.accepted.size() + 1;
  return true;
}

void Session::rewind(const SessionMark& m) {
  if (m.tokens == 0 || m.tokens > state_.tokens.size() || m.rounds > log_.rounds.size()) {
    throw UsageError("rewind: mark is not behind the current state");
  }
  state_.tokens.resize(m.tokens);
  state_.features.resize((m.tokens - 1) * state_.hidden);
  state_.target_cache.truncate(m.tokens - 1);
  log_.rounds.resize(m.rounds);
  log_.tokens_emitted = m.emitted;
}

std::vector<TokenId> Session::emitted() const {
  return {state_.tokens.begin() + static_cast<std::ptrdiff_t>(prompt_length_), state_.tokens.end()};
}

GenerationResult generate(std::shared_ptr<const TransformerWeights> target, Drafter* drafter,
                          std::span<const TokenId> prompt, const GenerationParams& params) {
  const auto start = std::chrono::steady_clock::now();
  Session session(std::move(target), drafter, params);
  session.prefill(prompt);
  while (session.log().tokens_emitted < params.max_new_tokens) {
    if (!session.step()) {
      session.mutable_log().truncated = true;
      session.mutable_log().truncation_reason = "cache capacity reached";
      break;
    }
  }
  GenerationResult result;
  result.tokens = session.emitted();
  if (result.tokens.size() > params.max_new_tokens) result.tokens.resize(params.max_new_tokens);
  result.log = session.log();
  result.log.tokens_returned = result.tokens.size();
  result.log.walltime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
