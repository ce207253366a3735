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

#include "eaglet/corpus.hpp"
#include "eaglet/drafting.hpp"
#include "eaglet/engine.hpp"
#include "eaglet/model.hpp"
#include "eaglet/real.hpp"
#include "json.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

// Average acceptance length over non-prefill rounds. Variant A counts the
// bonus token, variant B only accepted draft tokens.
struct Tau {
  double variant_a = 0;
  double variant_b = 0;
  std::size_t rounds = 0;
};

// Throws UsageError when no log has a decoding round.
Tau compute_tau(std::span<const RunLog> logs);

// 0.5 * sum |a - b|; UsageError on length mismatch.
double total_variation(std::span<const double> a, std::span<const double> b);

struct AlphaOptions {
  std::size_t max_n = 4;
  real temperature = 0;
  std::size_t positions = 200;  // sampled evaluation positions
  std::size_t min_prefix = 32;
  std::uint64_t seed = 1;
};

struct AlphaResult {
  std::size_t n = 0;
  double alpha = 0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

// n-alpha for n = 0..max_n on shared positions. At a position with context
// t_0..t_c (c >= min_prefix) the drafter runs its root step and then n
// expansions along the true tokens t_{c+1}..t_{c+n}, so the last n features
// it consumed are its own predictions. Its distribution q for t_{c+n+1} is
// scored against the target's p by the acceptance probability of one
// drafted token: sum min(p, q) = 1 - TV(p, q) for T > 0, and
// [argmax q == argmax p] for T == 0. All n share the sampled positions;
// positions without max_n further tokens or that do not fit max_positions
// are never sampled and are reported as skipped.
std::vector<AlphaResult> compute_alpha_table(const TransformerWeights& target, Drafter& drafter, const Corpus& eval,
                                             const AlphaOptions& options);
AlphaResult compute_alpha_n(const TransformerWeights& target, Drafter& drafter, const Corpus& eval, std::size_t n,
                            const AlphaOptions& options);

struct AuditOptions {
  DecodeMode mode = DecodeMode::kChain;
  std::size_t gamma = 4;
  TreeTopology topology;
  real temperature = 1;
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  double tvd_threshold = 0.01;
  double significance = 0.001;  // family-wise, Bonferroni-split over contexts
  bool clamp_acceptance = true;  // false runs the mutated acceptance rule
};

struct AuditContext {
  std::string kind;  // "first_token" or "second_token"
  std::vector<TokenId> context;
  TokenId conditioned_on = -1;  // fixed first token for second_token audits
  std::size_t samples = 0;
  std::vector<double> target;
  std::vector<double> empirical;
  double tvd = 0;
  double chi_square = 0;
  std::size_t dof = 0;
  double p_value = 1;
  bool pass = false;
};

struct AuditReport {
  static constexpr int kSchemaVersion = 1;
  AuditOptions options;
  std::vector<AuditContext> contexts;
  double per_context_significance = 0;
  double max_tvd = 0;
  double min_p_value = 1;
  bool pass = false;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Pearson chi-square of observed counts against expected probabilities.
// Bins with expected count < 5 are pooled; observations where the expected
// probability is zero force p = 0.
struct ChiSquare {
  double statistic = 0;
  std::size_t dof = 0;
  double p_value = 1;
};
ChiSquare chi_square_test(std::span<const std::size_t> observed, std::span<const double> expected_probs);

// For every context, runs `trials` independent rounds from the same state
// (prefill of context[0..n-2], last token pending) and compares the law of
// the first emitted token with the target's conditional. For every
// second_token_contexts entry it also conditions on the target's most likely
// first token x and compares the law of the second emitted token with
// p(. | context, x).
AuditReport lossless_audit(std::shared_ptr<const TransformerWeights> target, Drafter& drafter,
                           const std::vector<std::vector<TokenId>>& contexts,
                           const std::vector<std::vector<TokenId>>& second_token_contexts,
                           const AuditOptions& options);

// Contexts from `eval` ranked by the draft/target mismatch at their pending
// position, most different first. Useful to give the audit power.
std::vector<std::vector<TokenId>> audit_contexts(const TransformerWeights& target, Drafter& drafter,
                                                 const Corpus& eval, std::size_t count, std::size_t context_length,
                                                 real temperature, std::uint64_t seed);

struct BenchSetting {
  DecodeMode mode = DecodeMode::kVanilla;
  real temperature = 0;
  std::size_t gamma = 4;
  TreeTopology topology;
};

struct BenchOptions {
  std::vector<BenchSetting> settings;
  std::size_t max_new_tokens = 64;
  std::size_t repetitions = 5;
  std::size_t warmup = 2;
  std::uint64_t seed = 1;
};

struct BenchRecord {
  BenchSetting setting;
  std::string drafter;
  std::vector<double> walltimes;  // seconds per repetition, summed over prompts
  double median_walltime = 0;
  double speedup = 0;  // vanilla median at the same temperature / this median
  Tau tau;
  std::uint64_t target_forwards = 0;
  std::uint64_t draft_forwards = 0;
  std::size_t tokens = 0;
  std::vector<std::uint64_t> seeds;
  // Every decoding round used one target forward, and tree/chain drafting
  // used exactly depth / gamma draft forwards.
  bool mechanism_ok = true;
  std::vector<double> alpha;  // 0-alpha.. when measured
};

struct BenchReport {
  static constexpr int kSchemaVersion = 1;
  std::string target_hash;
  std::string drafter;
  std::size_t prompts = 0;
  std::size_t max_new_tokens = 0;
  std::size_t repetitions = 0;
  std::size_t warmup = 0;
  std::vector<BenchRecord> records;

  bool mechanism_ok() const;
  nlohmann::json to_json() const;
  // Aligned table with columns mode, T, speedup, tau, 0-alpha..4-alpha.
  std::string to_table() const;
};

// Seeds repetition r of prompt i with seed + i. Every setting needs a vanilla
// setting at the same temperature for its speedup; one is added when absent.
BenchReport speedup_benchmark(std::shared_ptr<const TransformerWeights> target, Drafter* drafter,
                              const std::vector<std::vector<TokenId>>& prompts, BenchOptions options);

// Attaches 0-alpha..max_n-alpha at each record's temperature.
void attach_alpha(BenchReport& report, const TransformerWeights& target, Drafter& drafter, const Corpus& eval,
                  const AlphaOptions& options);

}  // namespace EAGLET_ABI
}  // namespace eaglet
