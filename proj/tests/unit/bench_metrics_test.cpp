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


#include "eaglet/bench_metrics.hpp"

#include <gtest/gtest.h>

#include "eaglet/draft_head.hpp"
#include "eaglet/errors.hpp"
#include "test_util.hpp"

namespace eaglet {
namespace {

using testing::random_tokens;
using testing::tiny_target;

std::shared_ptr<const DraftHeadWeights> tiny_head(const TransformerWeights& target) {
  return std::make_shared<const DraftHeadWeights>(init_draft_head(target, DraftInputMode::kFeatureShiftedToken, 11));
}

RoundRecord round_with(std::size_t accepted, bool prefill = false) {
  RoundRecord r;
  r.prefill = prefill;
  r.accepted = accepted;
  r.offered = 4;
  return r;
}

Corpus random_corpus(std::size_t sequences, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  for (std::size_t i = 0; i < sequences; ++i) c.sequences.push_back(random_tokens(length, 32, rng));
  return c;
}

TEST(Tau, CountsBonusOnlyInVariantA) {
  RunLog perfect;
  perfect.rounds = {round_with(0, true), round_with(4), round_with(4)};
  Tau t = compute_tau(std::span(&perfect, 1));
  EXPECT_DOUBLE_EQ(t.variant_a, 5.0);
  EXPECT_DOUBLE_EQ(t.variant_b, 4.0);
  EXPECT_EQ(t.rounds, 2u);

  RunLog rejecting;
  rejecting.rounds = {round_with(0, true), round_with(0), round_with(0), round_with(0)};
  t = compute_tau(std::span(&rejecting, 1));
  EXPECT_DOUBLE_EQ(t.variant_a, 1.0);
  EXPECT_DOUBLE_EQ(t.variant_b, 0.0);

  std::vector<RunLog> both = {perfect, rejecting};
  EXPECT_DOUBLE_EQ(compute_tau(both).variant_b, 8.0 / 5.0);
}

TEST(Tau, NeedsADecodingRound) {
  RunLog only_prefill;
  only_prefill.rounds = {round_with(0, true)};
  EXPECT_THROW(compute_tau(std::span(&only_prefill, 1)), UsageError);
  EXPECT_THROW(compute_tau({}), UsageError);
}

TEST(TotalVariation, KnownValues) {
  const std::vector<double> p = {0.5, 0.5, 0.0}, q = {0.0, 0.5, 0.5}, r = {0.0, 0.0, 1.0};
  EXPECT_DOUBLE_EQ(total_variation(p, p), 0.0);
  EXPECT_DOUBLE_EQ(total_variation(p, q), 0.5);
  EXPECT_DOUBLE_EQ(total_variation(p, r), 1.0);
  EXPECT_THROW(total_variation(p, std::vector<double>{1.0}), UsageError);
}

TEST(ChiSquare, MatchesHandComputation) {
  // 3 bins, expected 50/30/20 out of 100.
  const std::vector<std::size_t> obs = {55, 25, 20};
  const std::vector<double> probs = {0.5, 0.3, 0.2};
  ChiSquare c = chi_square_test(obs, probs);
  EXPECT_NEAR(c.statistic, 25.0 / 50 + 25.0 / 30, 1e-12);
  EXPECT_EQ(c.dof, 2u);
  EXPECT_NEAR(c.p_value, std::exp(-c.statistic / 2), 1e-12);  // closed form for 2 dof
}

TEST(ChiSquare, PoolsSmallBinsAndFlagsImpossibleOutcomes) {
  const std::vector<double> probs = {0.9, 0.06, 0.02, 0.02};
  ChiSquare c = chi_square_test(std::vector<std::size_t>{90, 6, 2, 2}, probs);
  EXPECT_EQ(c.dof, 2u);  // the two 2% bins pool into one
  EXPECT_NEAR(c.statistic, 0.0, 1e-12);
  EXPECT_NEAR(c.p_value, 1.0, 1e-12);
  c = chi_square_test(std::vector<std::size_t>{99, 0, 0, 1}, std::vector<double>{0.9, 0.1, 0.0, 0.0});
  EXPECT_EQ(c.p_value, 0.0);
}

TEST(ChiSquare, UniformSamplesRarelyReject) {
  Rng rng(4);
  int rejections = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> counts(10, 0);
    for (int i = 0; i < 2000; ++i) ++counts[rng.below(10)];
    if (chi_square_test(counts, std::vector<double>(10, 0.1)).p_value < 0.01) ++rejections;
  }
  EXPECT_LE(rejections, 8);
}

TEST(Alpha, OracleDraftScoresOne) {
  auto target = tiny_target();
  TransformerDrafter oracle(target);
  const Corpus eval = random_corpus(4, 48, 2);
  for (real temperature : {real(0), real(1)}) {
    AlphaOptions o;
    o.temperature = temperature;
    o.positions = 12;
    o.min_prefix = 8;
    for (const AlphaResult& a : compute_alpha_table(*target, oracle, eval, o)) {
      EXPECT_EQ(a.evaluated, 12u);
      EXPECT_NEAR(a.alpha, 1.0, 1e-6) << a.n << "-alpha at T " << temperature;
    }
  }
}

TEST(Alpha, UntrainedHeadIsImperfectAndSkipsShortPositions) {
  auto target = tiny_target();
  EagleDrafter eagle(tiny_head(*target));
  Corpus eval = random_corpus(1, 12, 3);
  AlphaOptions o;
  o.min_prefix = 8;
  o.positions = 100;
  const auto table = compute_alpha_table(*target, eagle, eval, o);
  // Contexts end at t_8..t_11 and none has four further tokens.
  EXPECT_EQ(table[0].evaluated, 0u);
  EXPECT_EQ(table[4].skipped, 4u);
  o.max_n = 2;
  const auto short_table = compute_alpha_table(*target, eagle, eval, o);
  EXPECT_EQ(short_table[2].evaluated, 2u);  // c = 8, 9
  EXPECT_EQ(short_table[0].evaluated, 2u);
  EXPECT_LT(short_table[0].alpha, 1.0);
  const AlphaResult two = compute_alpha_n(*target, eagle, eval, 2, o);
  EXPECT_DOUBLE_EQ(two.alpha, short_table[2].alpha);
  o.max_n = 5;
  EXPECT_THROW(compute_alpha_table(*target, eagle, eval, o), UsageError);
}

TEST(Session, RewindReplaysLikeAFreshSession) {
  auto target = tiny_target();
  EagleDrafter eagle(tiny_head(*target));
  Rng rng(6);
  const auto ctx = random_tokens(10, 32, rng);
  GenerationParams params;
  params.mode = DecodeMode::kChain;
  params.temperature = 1;
  params.max_new_tokens = 100;
  params.seed = 99;
  Session warm(target, &eagle, params);
  warm.prefill_pending(ctx);
  const SessionMark mark = warm.mark();
  for (int i = 0; i < 4; ++i) ASSERT_TRUE(warm.step());
  warm.rewind(mark);
  warm.mutable_state().rng = Rng(7);
  for (int i = 0; i < 3; ++i) ASSERT_TRUE(warm.step());

  EagleDrafter fresh_drafter(tiny_head(*target));
  params.seed = 7;
  Session fresh(target, &fresh_drafter, params);
  fresh.prefill_pending(ctx);
  for (int i = 0; i < 3; ++i) ASSERT_TRUE(fresh.step());
  EXPECT_EQ(warm.emitted(), fresh.emitted());
  EXPECT_EQ(warm.log().rounds.size(), fresh.log().rounds.size());
  EXPECT_EQ(warm.log().tokens_emitted, fresh.log().tokens_emitted);
  EXPECT_THROW(warm.rewind(SessionMark{1000, 0, 0}), UsageError);
}

AuditOptions small_audit(DecodeMode mode, bool clamp) {
  AuditOptions o;
  o.mode = mode;
  o.gamma = 3;
  o.temperature = 1;
  o.trials = 20000;
  o.tvd_threshold = 0.03;  // loose: V = 32 with few samples
  o.clamp_acceptance = clamp;
  return o;
}

TEST(Audit, CorrectRulePassesAndMutationFails) {
  auto target = tiny_target();
  EagleDrafter eagle(tiny_head(*target));
  Rng rng(8);
  const std::vector<std::vector<TokenId>> ctxs = {random_tokens(6, 32, rng), random_tokens(9, 32, rng)};
  for (DecodeMode mode : {DecodeMode::kChain, DecodeMode::kTree}) {
    const AuditReport good = lossless_audit(target, eagle, ctxs, {}, small_audit(mode, true));
    EXPECT_TRUE(good.pass) << good.to_text();
    ASSERT_EQ(good.contexts.size(), 2u);
    EXPECT_EQ(good.contexts[0].samples, 20000u);
    const AuditReport bad = lossless_audit(target, eagle, ctxs, {}, small_audit(mode, false));
    EXPECT_FALSE(bad.pass) << bad.to_text();
    EXPECT_LT(bad.min_p_value, 1e-6);
  }
}

TEST(Audit, SecondTokenLawMatchesTarget) {
  auto target = tiny_target();
  EagleDrafter eagle(tiny_head(*target));
  Rng rng(9);
  const AuditReport r = lossless_audit(target, eagle, {}, {random_tokens(7, 32, rng)}, small_audit(DecodeMode::kChain, true));
  ASSERT_EQ(r.contexts.size(), 1u);
  EXPECT_EQ(r.contexts[0].kind, "second_token");
  EXPECT_GE(r.contexts[0].conditioned_on, 0);
  EXPECT_GT(r.contexts[0].samples, 500u);
  EXPECT_GT(r.contexts[0].p_value, 1e-4) << r.to_text();
  const auto j = r.to_json();
  EXPECT_EQ(j.at("contexts").size(), 1u);
}

TEST(Audit, RejectsGreedyAndEmptyInput) {
  auto target = tiny_target();
  EagleDrafter eagle(tiny_head(*target));
  AuditOptions o;
  o.temperature = 0;
  EXPECT_THROW(lossless_audit(target, eagle, {{1, 2, 3}}, {}, o), UsageError);
  o.temperature = 1;
  EXPECT_THROW(lossless_audit(target, eagle, {}, {}, o), UsageError);
}

TEST(AuditContexts, RankedByMismatch) {
  auto target = tiny_target();
  EagleDrafter eagle(tiny_head(*target));
  const auto ctxs = audit_contexts(*target, eagle, random_corpus(3, 40, 10), 4, 24, 1, 1);
  ASSERT_EQ(ctxs.size(), 4u);
  for (const auto& c : ctxs) {
    EXPECT_GE(c.size(), 12u);
    EXPECT_LE(c.size(), 24u);
  }
}

TEST(Bench, ReportsMechanismAndSpeedups) {
  auto target = tiny_target();
  EagleDrafter eagle(tiny_head(*target));
  Rng rng(11);
  const std::vector<std::vector<TokenId>> prompts = {random_tokens(5, 32, rng), random_tokens(7, 32, rng)};
  BenchOptions o;
  o.max_new_tokens = 12;
  o.repetitions = 3;
  o.warmup = 1;
  BenchSetting chain{DecodeMode::kChain, 0, 3, {}};
  BenchSetting tree{DecodeMode::kTree, 0, 4, {}};
  o.settings = {chain, tree};
  BenchReport report = speedup_benchmark(target, &eagle, prompts, o);
  ASSERT_EQ(report.records.size(), 3u);  // vanilla added
  EXPECT_EQ(report.records[0].setting.mode, DecodeMode::kVanilla);
  EXPECT_TRUE(report.mechanism_ok());
  for (const BenchRecord& r : report.records) {
    EXPECT_EQ(r.walltimes.size(), 3u);
    EXPECT_GT(r.speedup, 0.0);
    EXPECT_EQ(r.seeds, (std::vector<std::uint64_t>{1, 2}));
    EXPECT_GE(r.tau.variant_a, 1.0);
  }
  EXPECT_DOUBLE_EQ(report.records[0].speedup, 1.0);
  EXPECT_DOUBLE_EQ(report.records[0].tau.variant_a, 1.0);

  AlphaOptions ao;
  ao.min_prefix = 2;
  ao.positions = 5;
  attach_alpha(report, *target, eagle, Corpus{prompts}, ao);
  EXPECT_TRUE(report.records[0].alpha.empty());
  EXPECT_EQ(report.records[1].alpha.size(), 5u);

  const auto j = report.to_json();
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("records").size(), 3u);
  EXPECT_TRUE(j.at("mechanism_ok").get<bool>());
  const std::string table = report.to_table();
  EXPECT_NE(table.find("4-alpha"), std::string::npos);
  EXPECT_NE(table.find("chain"), std::string::npos);
  EXPECT_THROW(speedup_benchmark(target, nullptr, prompts, o), UsageError);
}

}  // namespace
}  // namespace eaglet
