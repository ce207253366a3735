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

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "eaglet/errors.hpp"
#include "eaglet/ops.hpp"
#include "eaglet/verification.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

Tau compute_tau(std::span<const RunLog> logs) {
  Tau tau;
  double accepted = 0;
  for (const RunLog& log : logs) {
    for (const RoundRecord& r : log.rounds) {
      if (r.prefill) continue;
      accepted += static_cast<double>(r.accepted);
      ++tau.rounds;
    }
  }
  if (tau.rounds == 0) throw UsageError("compute_tau: no decoding rounds in the given logs");
  tau.variant_b = accepted / static_cast<double>(tau.rounds);
  tau.variant_a = tau.variant_b + 1.0;
  return tau;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw UsageError("total_variation: supports differ (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

namespace {

std::vector<std::int64_t> iota_positions(std::size_t n) {
  std::vector<std::int64_t> p(n);
  std::iota(p.begin(), p.end(), std::int64_t{0});
  return p;
}

std::span<const real> row_of(const Tensor& t, std::size_t r) {
  const std::size_t w = t.dim(1);
  return t.data().subspan(r * w, w);
}

Dist softmax_dist(std::span<const real> logits, real temperature) {
  Tensor p = softmax(Tensor({logits.size()}, std::vector<real>(logits.begin(), logits.end())), temperature);
  return to_dist(p.data());
}

// Acceptance probability of one drafted token, in expectation over the draft.
double score(std::span<const real> target_logits, std::span<const real> draft_logits, real temperature) {
  if (temperature == 0) return argmax(target_logits) == argmax(draft_logits) ? 1.0 : 0.0;
  const Dist p = softmax_dist(target_logits, temperature);
  const Dist q = to_dist(draft_distribution(draft_logits, temperature));
  return 1.0 - total_variation(p, q);
}

ForwardResult teacher_forced(const TransformerWeights& target, std::span<const TokenId> tokens) {
  NoGradGuard guard;
  return forward(target, tokens, iota_positions(tokens.size()), AttentionMask::causal(tokens.size()), nullptr);
}

std::shared_ptr<const TransformerWeights> borrow(const TransformerWeights& target) {
  return {&target, [](const TransformerWeights*) {}};
}

// Partial Fisher-Yates: up to k distinct indices from [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

}  // namespace

std::vector<AlphaResult> compute_alpha_table(const TransformerWeights& target, Drafter& drafter, const Corpus& eval,
                                             const AlphaOptions& options) {
  if (options.max_n > 4) throw UsageError("n-alpha is defined for n in [0, 4]");
  if (options.min_prefix < 1) throw UsageError("n-alpha needs a prefix of at least one token");
  eval.validate(target.config.vocab_size);
  const std::size_t max_pos = target.config.max_positions;
  const std::size_t span = options.max_n + 1;
  std::vector<AlphaResult> out(options.max_n + 1);
  std::size_t skipped = 0;
  // Every n is scored on the same positions: those with t_{c+max_n} present.
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < eval.sequences.size(); ++i) {
    for (std::size_t c = options.min_prefix; c < eval.sequences[i].size(); ++c) {
      if (c + span <= eval.sequences[i].size() && c + span <= max_pos) {
        candidates.emplace_back(i, c);
      } else {
        ++skipped;
      }
    }
  }
  std::vector<double> sums(options.max_n + 1, 0.0);
  for (std::size_t n = 0; n <= options.max_n; ++n) {
    out[n].n = n;
    out[n].skipped = skipped;
  }
  Rng rng(options.seed);
  GenerationParams params;
  for (std::size_t pick : sample_indices(candidates.size(), options.positions, rng)) {
    const auto& seq = eval.sequences[candidates[pick].first];
    const std::size_t c = candidates[pick].second;
    Session session(borrow(target), nullptr, params);
    session.prefill_pending(std::span(seq).first(c + 1));
    const ForwardResult truth = teacher_forced(target, std::span(seq).first(c + span));
    drafter.reset();
    DraftStep step = drafter.root(session.state());
    int entry = -1;
    for (std::size_t n = 0; n < span; ++n) {
      sums[n] += score(row_of(truth.logits, c + n), row_of(step.logits, 0), options.temperature);
      ++out[n].evaluated;
      if (n + 1 == span) break;
      ExpandItem item;
      item.token = seq[c + n + 1];
      item.parent_token = seq[c + n];
      item.context_feature.assign(step.features.data().begin(), step.features.data().end());
      item.depth = n + 1;
      item.parent_entry = entry;
      step = drafter.expand(session.state(), std::span(&item, 1));
      entry = step.first_entry;
    }
  }
  for (std::size_t n = 0; n <= options.max_n; ++n) {
    out[n].alpha = out[n].evaluated ? sums[n] / static_cast<double>(out[n].evaluated) : 0.0;
  }
  return out;
}

AlphaResult compute_alpha_n(const TransformerWeights& target, Drafter& drafter, const Corpus& eval, std::size_t n,
                            const AlphaOptions& options) {
  AlphaOptions o = options;
  o.max_n = n;
  return compute_alpha_table(target, drafter, eval, o).back();
}

ChiSquare chi_square_test(std::span<const std::size_t> observed, std::span<const double> expected_probs) {
  if (observed.size() != expected_probs.size()) throw UsageError("chi_square_test: size mismatch");
  const double n = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::size_t{0}));
  ChiSquare out;
  if (n == 0) return out;
  std::vector<double> obs, exp;
  double pooled_obs = 0, pooled_exp = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = n * expected_probs[i];
    if (e <= 0 && observed[i] > 0) {
      out.p_value = 0;
      out.statistic = std::numeric_limits<double>::infinity();
      return out;
    }
    if (e >= 5) {
      obs.push_back(static_cast<double>(observed[i]));
      exp.push_back(e);
    } else {
      pooled_obs += static_cast<double>(observed[i]);
      pooled_exp += e;
    }
  }
  if (pooled_exp > 0) {
    obs.push_back(pooled_obs);
    exp.push_back(pooled_exp);
  }
  for (std::size_t i = 0; i < obs.size(); ++i) out.statistic += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  if (obs.size() < 2) return out;
  out.dof = obs.size() - 1;
  boost::math::chi_squared_distribution<double> dist(static_cast<double>(out.dof));
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
  return out;
}

namespace {

std::uint64_t trial_seed(std::uint64_t base, std::size_t context, std::size_t trial) {
  std::uint64_t h = base * 0x9e3779b97f4a7c15ULL + context * 0xbf58476d1ce4e5b9ULL + trial;
  h ^= h >> 31;
  return h * 0x94d049bb133111ebULL;
}

AuditContext finish_context(std::string kind, std::vector<TokenId> context, const Dist& target,
                            const std::vector<std::size_t>& counts) {
  AuditContext ctx;
  ctx.kind = std::move(kind);
  ctx.context = std::move(context);
  ctx.target = target;
  ctx.samples = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  ctx.empirical.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    ctx.empirical[i] = ctx.samples ? static_cast<double>(counts[i]) / static_cast<double>(ctx.samples) : 0.0;
  }
  ctx.tvd = total_variation(ctx.empirical, target);
  const ChiSquare chi = chi_square_test(counts, target);
  ctx.chi_square = chi.statistic;
  ctx.dof = chi.dof;
  ctx.p_value = chi.p_value;
  return ctx;
}

}  // namespace

AuditReport lossless_audit(std::shared_ptr<const TransformerWeights> target, Drafter& drafter,
                           const std::vector<std::vector<TokenId>>& contexts,
                           const std::vector<std::vector<TokenId>>& second_token_contexts,
                           const AuditOptions& options) {
  if (!(options.temperature > 0)) throw UsageError("lossless_audit needs temperature > 0");
  if (options.mode == DecodeMode::kVanilla) throw UsageError("lossless_audit needs chain or tree mode");
  if (contexts.empty() && second_token_contexts.empty()) throw UsageError("lossless_audit: no contexts");
  AuditReport report;
  report.options = options;
  GenerationParams params;
  params.mode = options.mode;
  params.temperature = options.temperature;
  params.gamma = options.gamma;
  params.topology = options.topology;
  params.max_new_tokens = 1u << 20;
  params.seed = options.seed;
  params.clamp_acceptance = options.clamp_acceptance;
  const std::size_t v = target->config.vocab_size;

  auto run = [&](const std::vector<TokenId>& ctx, std::size_t index, bool second) {
    const ForwardResult truth = teacher_forced(*target, ctx);
    const Dist p1 = softmax_dist(row_of(truth.logits, ctx.size() - 1), options.temperature);
    drafter.reset();
    Session session(target, &drafter, params);
    session.prefill_pending(ctx);
    const SessionMark mark = session.mark();
    std::vector<std::size_t> counts(v, 0);
    const TokenId x = argmax_dist(p1);
    for (std::size_t t = 0; t < options.trials; ++t) {
      session.rewind(mark);
      session.mutable_state().rng = Rng(trial_seed(options.seed, index, t));
      std::vector<TokenId> emitted;
      do {
        if (!session.step()) throw CapacityError("lossless_audit: context too long for a round");
        emitted = session.emitted();
      } while (second && emitted.size() < 2);
      if (!second) {
        ++counts[emitted[0]];
      } else if (emitted[0] == x) {
        ++counts[emitted[1]];
      }
    }
    if (!second) return finish_context("first_token", ctx, p1, counts);
    std::vector<TokenId> extended = ctx;
    extended.push_back(x);
    const ForwardResult truth2 = teacher_forced(*target, extended);
    AuditContext out =
        finish_context("second_token", ctx, softmax_dist(row_of(truth2.logits, ctx.size()), options.temperature), counts);
    out.conditioned_on = x;
    return out;
  };

  std::size_t index = 0;
  for (const auto& ctx : contexts) report.contexts.push_back(run(ctx, index++, false));
  for (const auto& ctx : second_token_contexts) report.contexts.push_back(run(ctx, index++, true));

  report.per_context_significance = options.significance / static_cast<double>(report.contexts.size());
  report.pass = true;
  for (AuditContext& c : report.contexts) {
    c.pass = c.tvd < options.tvd_threshold && c.p_value > report.per_context_significance;
    report.pass = report.pass && c.pass;
    report.max_tvd = std::max(report.max_tvd, c.tvd);
    report.min_p_value = std::min(report.min_p_value, c.p_value);
  }
  return report;
}

std::vector<std::vector<TokenId>> audit_contexts(const TransformerWeights& target, Drafter& drafter,
                                                 const Corpus& eval, std::size_t count, std::size_t context_length,
                                                 real temperature, std::uint64_t seed) {
  if (context_length < 2) throw UsageError("audit contexts need at least two tokens");
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < eval.sequences.size(); ++i) {
    const std::size_t len = std::min(eval.sequences[i].size(), context_length);
    for (std::size_t c = std::max<std::size_t>(2, context_length / 2); c <= len; ++c) candidates.emplace_back(i, c);
  }
  Rng rng(seed);
  GenerationParams params;
  std::vector<std::pair<double, std::vector<TokenId>>> scored;
  for (std::size_t pick : sample_indices(candidates.size(), 20 * count, rng)) {
    const auto& seq = eval.sequences[candidates[pick].first];
    std::vector<TokenId> ctx(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(candidates[pick].second));
    const ForwardResult truth = teacher_forced(target, ctx);
    Session session(borrow(target), nullptr, params);
    session.prefill_pending(ctx);
    drafter.reset();
    DraftStep step = drafter.root(session.state());
    const Dist p = softmax_dist(row_of(truth.logits, ctx.size() - 1), temperature);
    const Dist q = to_dist(draft_distribution(row_of(step.logits, 0), temperature));
    scored.emplace_back(total_variation(p, q), std::move(ctx));
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::vector<TokenId>> out;
  for (std::size_t i = 0; i < scored.size() && out.size() < count; ++i) out.push_back(scored[i].second);
  return out;
}

nlohmann::json AuditReport::to_json() const {
  nlohmann::json ctxs = nlohmann::json::array();
  for (const AuditContext& c : contexts) {
    ctxs.push_back({{"kind", c.kind},
                    {"context", c.context},
                    {"conditioned_on", c.conditioned_on},
                    {"samples", c.samples},
                    {"tvd", c.tvd},
                    {"chi_square", c.chi_square},
                    {"dof", c.dof},
                    {"p_value", c.p_value},
                    {"pass", c.pass}});
  }
  return {{"schema_version", kSchemaVersion},
          {"mode", decode_mode_name(options.mode)},
          {"temperature", options.temperature},
          {"trials", options.trials},
          {"seed", options.seed},
          {"clamp_acceptance", options.clamp_acceptance},
          {"tvd_threshold", options.tvd_threshold},
          {"family_significance", options.significance},
          {"per_context_significance", per_context_significance},
          {"max_tvd", max_tvd},
          {"min_p_value", min_p_value},
          {"pass", pass},
          {"contexts", ctxs}};
}

std::string AuditReport::to_text() const {
  std::ostringstream out;
  out << "lossless audit: mode " << decode_mode_name(options.mode) << ", T " << options.temperature << ", "
      << options.trials << " trials per context"
      << (options.clamp_acceptance ? "" : ", MUTATED acceptance rule (no min clamp)") << "\n";
  out << "pass when TVD < " << options.tvd_threshold << " and chi-square p > " << per_context_significance
      << " (" << options.significance << " Bonferroni-split over " << contexts.size() << " contexts)\n";
  out << std::left << std::setw(14) << "kind" << std::setw(10) << "samples" << std::setw(12) << "tvd"
      << std::setw(12) << "chi2" << std::setw(6) << "dof" << std::setw(12) << "p" << "result\n";
  for (const AuditContext& c : contexts) {
    out << std::left << std::setw(14) << c.kind << std::setw(10) << c.samples << std::setw(12) << std::setprecision(4)
        << c.tvd << std::setw(12) << c.chi_square << std::setw(6) << c.dof << std::setw(12) << c.p_value
        << (c.pass ? "pass" : "FAIL") << "\n";
  }
  out << "overall: " << (pass ? "PASS" : "FAIL") << " (max TVD " << max_tvd << ", min p " << min_p_value << ")\n";
  return out.str();
}

bool BenchReport::mechanism_ok() const {
  return std::all_of(records.begin(), records.end(), [](const BenchRecord& r) { return r.mechanism_ok; });
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool mechanism_holds(const RunLog& log, const BenchSetting& s) {
  const std::uint64_t draft = s.mode == DecodeMode::kChain  ? s.gamma
                              : s.mode == DecodeMode::kTree ? s.topology.depth()
                                                            : 0;
  for (const RoundRecord& r : log.rounds) {
    if (r.target_forwards != 1) return false;
    if (!r.prefill && r.draft_forwards != draft) return false;
  }
  return true;
}

}  // namespace

BenchReport speedup_benchmark(std::shared_ptr<const TransformerWeights> target, Drafter* drafter,
                              const std::vector<std::vector<TokenId>>& prompts, BenchOptions options) {
  if (prompts.empty()) throw UsageError("speedup_benchmark: no prompts");
  if (options.repetitions == 0) throw UsageError("speedup_benchmark: repetitions must be >= 1");
  for (const BenchSetting& s : options.settings) {
    if (s.mode != DecodeMode::kVanilla && !drafter) throw UsageError("speedup_benchmark: chain/tree need a drafter");
  }
  // Each temperature's vanilla baseline comes first, then its other settings.
  std::vector<BenchSetting> ordered;
  std::vector<real> temps;
  for (const BenchSetting& s : options.settings) {
    if (std::find(temps.begin(), temps.end(), s.temperature) == temps.end()) temps.push_back(s.temperature);
  }
  for (real t : temps) {
    auto at_t = [&](const BenchSetting& s) { return s.temperature == t; };
    auto vanilla = std::find_if(options.settings.begin(), options.settings.end(), [&](const BenchSetting& s) {
      return at_t(s) && s.mode == DecodeMode::kVanilla;
    });
    ordered.push_back(vanilla != options.settings.end() ? *vanilla : BenchSetting{DecodeMode::kVanilla, t, 4, {}});
    for (const BenchSetting& s : options.settings) {
      if (at_t(s) && s.mode != DecodeMode::kVanilla) ordered.push_back(s);
    }
  }
  options.settings = std::move(ordered);

  BenchReport report;
  report.target_hash = hash_hex(weights_hash(target->named()));
  report.drafter = drafter ? drafter->name() : "none";
  report.prompts = prompts.size();
  report.max_new_tokens = options.max_new_tokens;
  report.repetitions = options.repetitions;
  report.warmup = options.warmup;
  report.records.resize(options.settings.size());
  std::vector<std::vector<RunLog>> logs(options.settings.size());

  // Repetitions are interleaved across settings so drift affects all alike.
  for (std::size_t rep = 0; rep < options.warmup + options.repetitions; ++rep) {
    for (std::size_t s = 0; s < options.settings.size(); ++s) {
      const BenchSetting& setting = options.settings[s];
      BenchRecord& rec = report.records[s];
      GenerationParams params;
      params.mode = setting.mode;
      params.temperature = setting.temperature;
      params.max_new_tokens = options.max_new_tokens;
      params.gamma = setting.gamma;
      params.topology = setting.topology;
      const auto start = std::chrono::steady_clock::now();
      for (std::size_t i = 0; i < prompts.size(); ++i) {
        params.seed = options.seed + i;
        GenerationResult r =
            generate(target, setting.mode == DecodeMode::kVanilla ? nullptr : drafter, prompts[i], params);
        if (rep == options.warmup) {
          rec.seeds.push_back(params.seed);
          rec.tokens += r.tokens.size();
          rec.mechanism_ok = rec.mechanism_ok && mechanism_holds(r.log, setting);
          logs[s].push_back(std::move(r.log));
        }
      }
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (rep >= options.warmup) rec.walltimes.push_back(secs);
    }
  }

  for (std::size_t s = 0; s < options.settings.size(); ++s) {
    BenchRecord& rec = report.records[s];
    rec.setting = options.settings[s];
    rec.drafter = rec.setting.mode == DecodeMode::kVanilla ? "none" : report.drafter;
    rec.median_walltime = median(rec.walltimes);
    rec.tau = compute_tau(logs[s]);
    for (const RunLog& log : logs[s]) {
      const ForwardCounts c = count_forwards(log);
      rec.target_forwards += c.target;
      rec.draft_forwards += c.draft;
    }
  }
  for (BenchRecord& rec : report.records) {
    for (const BenchRecord& base : report.records) {
      if (base.setting.mode == DecodeMode::kVanilla && base.setting.temperature == rec.setting.temperature) {
        rec.speedup = base.median_walltime / rec.median_walltime;
        break;
      }
    }
  }
  return report;
}

void attach_alpha(BenchReport& report, const TransformerWeights& target, Drafter& drafter, const Corpus& eval,
                  const AlphaOptions& options) {
  std::map<real, std::vector<double>> by_temp;
  for (BenchRecord& rec : report.records) {
    if (rec.setting.mode == DecodeMode::kVanilla) continue;
    auto it = by_temp.find(rec.setting.temperature);
    if (it == by_temp.end()) {
      AlphaOptions o = options;
      o.temperature = rec.setting.temperature;
      std::vector<double> alphas;
      for (const AlphaResult& a : compute_alpha_table(target, drafter, eval, o)) alphas.push_back(a.alpha);
      it = by_temp.emplace(rec.setting.temperature, std::move(alphas)).first;
    }
    rec.alpha = it->second;
  }
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json recs = nlohmann::json::array();
  for (const BenchRecord& r : records) {
    recs.push_back({{"mode", decode_mode_name(r.setting.mode)},
                    {"temperature", r.setting.temperature},
                    {"gamma", r.setting.gamma},
                    {"topology", {{"branching", r.setting.topology.branching}, {"budget", r.setting.topology.budget}}},
                    {"drafter", r.drafter},
                    {"walltimes_seconds", r.walltimes},
                    {"median_walltime_seconds", r.median_walltime},
                    {"speedup", r.speedup},
                    {"tau_a", r.tau.variant_a},
                    {"tau_b", r.tau.variant_b},
                    {"rounds", r.tau.rounds},
                    {"target_forwards", r.target_forwards},
                    {"draft_forwards", r.draft_forwards},
                    {"tokens", r.tokens},
                    {"seeds", r.seeds},
                    {"mechanism_ok", r.mechanism_ok},
                    {"alpha", r.alpha}});
  }
  return {{"schema_version", kSchemaVersion},
          {"target_hash", target_hash},
          {"drafter", drafter},
          {"prompts", prompts},
          {"max_new_tokens", max_new_tokens},
          {"repetitions", repetitions},
          {"warmup", warmup},
          {"timer", "steady_clock, median over repetitions"},
          {"mechanism_ok", mechanism_ok()},
          {"records", recs}};
}

std::string BenchReport::to_table() const {
  std::ostringstream out;
  out << std::left << std::setw(9) << "mode" << std::setw(6) << "T" << std::setw(9) << "speedup" << std::setw(8)
      << "tau";
  for (int n = 0; n <= 4; ++n) out << std::setw(8) << (std::to_string(n) + "-alpha");
  out << "\n";
  auto cell = [&](double v, int width) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(2) << v;
    out << std::setw(width) << c.str();
  };
  for (const BenchRecord& r : records) {
    out << std::setw(9) << decode_mode_name(r.setting.mode);
    cell(r.setting.temperature, 6);
    out << std::setw(9) << ([&] {
      std::ostringstream c;
      c << std::fixed << std::setprecision(2) << r.speedup << "x";
      return c.str();
    })();
    cell(r.tau.variant_a, 8);
    for (int n = 0; n <= 4; ++n) {
      if (static_cast<std::size_t>(n) < r.alpha.size()) {
        cell(r.alpha[n], 8);
      } else {
        out << std::setw(8) << "-";
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
