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

#include "eaglet/drafting.hpp"
#include "eaglet/model.hpp"
#include "eaglet/real.hpp"
#include "eaglet/verification.hpp"
#include "json.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

enum class DecodeMode { kVanilla, kChain, kTree };

std::string decode_mode_name(DecodeMode mode);
DecodeMode parse_decode_mode(const std::string& text);

struct GenerationParams {
  DecodeMode mode = DecodeMode::kVanilla;
  real temperature = 0;
  std::size_t max_new_tokens = 64;
  std::size_t gamma = 4;
  TreeTopology topology;
  std::uint64_t seed = 0;
  // Negative control for audits; never disable outside tests.
  bool clamp_acceptance = true;

  // Throws UsageError on invalid combinations.
  void validate() const;
};

struct RoundRecord {
  std::size_t round = 0;
  bool prefill = false;
  std::size_t offered = 0;
  std::size_t accepted = 0;
  std::vector<TokenId> accepted_tokens;
  TokenId bonus = 0;
  std::uint64_t target_forwards = 0;
  std::uint64_t draft_forwards = 0;
};

struct RunLog {
  static constexpr int kSchemaVersion = 1;
  std::string mode;
  std::string drafter;
  real temperature = 0;
  std::uint64_t seed = 0;
  std::size_t prompt_length = 0;
  std::size_t max_new_tokens = 0;
  std::vector<RoundRecord> rounds;
  std::size_t tokens_emitted = 0;
  std::size_t tokens_returned = 0;
  bool truncated = false;
  std::string truncation_reason;
  double walltime_seconds = 0;

  nlohmann::json to_json() const;
  static RunLog from_json(const nlohmann::json& j);
};

struct ForwardCounts {
  std::uint64_t target = 0;
  std::uint64_t draft = 0;
};

ForwardCounts count_forwards(const RunLog& log);

// Committed length and log position of a session, for rewinding.
struct SessionMark {
  std::size_t tokens = 0;
  std::size_t rounds = 0;
  std::size_t emitted = 0;
};

// One generation stream. The drafter may be null in vanilla mode.
class Session {
 public:
  Session(std::shared_ptr<const TransformerWeights> target, Drafter* drafter, GenerationParams params);

  // Processes the prompt and samples the first new token (logged as the
  // prefill round).
  void prefill(std::span<const TokenId> prompt);
  // Processes context[0..n-2] and leaves context.back() pending, emitting
  // nothing. Used to study a single round from a fixed context.
  void prefill_pending(std::span<const TokenId> context);
  // Runs one decoding round. Returns false, changing nothing, when the round
  // would not fit the caches.
  bool step();

  SessionMark mark() const { return {state_.tokens.size(), log_.rounds.size(), log_.tokens_emitted}; }
  // Drops everything committed after `m`; the RNG is left as is.
  void rewind(const SessionMark& m);

  const DraftState& state() const { return state_; }
  DraftState& mutable_state() { return state_; }
  const RunLog& log() const { return log_; }
  RunLog& mutable_log() { return log_; }
  // Tokens emitted after the prompt.
  std::vector<TokenId> emitted() const;

 private:
  bool step_vanilla();
  bool step_speculative();
  TokenId sample_next(std::span<const real> logits);
  std::vector<Dist> target_dists(const Tensor& logits) const;

  std::shared_ptr<const TransformerWeights> target_;
  Drafter* drafter_;
  GenerationParams params_;
  DraftState state_;
  RunLog log_;
  std::size_t prompt_length_ = 0;
  VerifyOptions verify_options_;
};

struct GenerationResult {
  std::vector<TokenId> tokens;  // at most max_new_tokens
  RunLog log;
};

GenerationResult generate(std::shared_ptr<const TransformerWeights> target, Drafter* drafter,
                          std::span<const TokenId> prompt, const GenerationParams& params);

// Verification mask for [bonus, nodes...] over a cache of `committed` slots.
AttentionMask verification_mask(const DraftTree& tree, std::size_t committed);

}  // namespace EAGLET_ABI
}  // namespace eaglet
