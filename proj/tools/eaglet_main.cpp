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


// Command-line entry point: make-corpus, train-target, train-draft, generate,
// bench, audit and alpha-table. Exit codes: 0 success, 1 usage or config
// error, 2 runtime error, 3 lossless audit failure.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eaglet/bench_metrics.hpp"
#include "eaglet/checkpoint.hpp"
#include "eaglet/corpus.hpp"
#include "eaglet/draft_head.hpp"
#include "eaglet/drafting.hpp"
#include "eaglet/engine.hpp"
#include "eaglet/engine_config.hpp"
#include "eaglet/errors.hpp"
#include "eaglet/training.hpp"

namespace fs = std::filesystem;
using namespace eaglet;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAudit = 3;

struct Options {
  std::string config;
  // make-corpus
  std::string out;
  std::uint64_t corpus_seed = 1;
  std::size_t corpus_size = 100000;
  // shared overrides
  std::string corpus;
  std::string curve;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::string draft_input;
  std::string data_mode;
  // generate
  std::string prompt;
  std::vector<int> prompt_tokens;
  std::string mode;
  std::optional<std::size_t> gamma;
  std::optional<double> temperature;
  std::optional<std::size_t> max_new_tokens;
  std::vector<std::size_t> branching;
  std::optional<std::size_t> budget;
  std::string log;
  bool print_tokens = false;
  // bench / alpha-table / audit
  std::optional<std::size_t> repetitions;
  std::optional<std::size_t> warmup;
  std::optional<std::size_t> prompts;
  std::vector<std::string> modes;
  std::optional<std::size_t> positions;
  bool no_alpha = false;
  std::optional<std::size_t> trials;
  bool mutate = false;
  bool untrained = false;
};

EngineConfig load_config(const Options& o) {
  return o.config.empty() ? EngineConfig::from_json(nlohmann::json::object()) : EngineConfig::load(o.config);
}

void require(const fs::path& path, const std::string& what) {
  if (path.empty()) throw ValidationError(what + " is not set in the config");
  if (!fs::exists(path)) throw ValidationError(what + " not found: " + path.string());
}

std::pair<Corpus, Corpus> load_split(const EngineConfig& c, std::size_t vocab) {
  require(c.corpus.path, "corpus.path");
  return split_corpus(ingest_corpus(c.corpus.path, vocab), c.corpus.held_out_fraction);
}

std::shared_ptr<const TransformerWeights> load_base_target(const EngineConfig& c) {
  require(c.target.checkpoint, "target.checkpoint");
  return std::make_shared<const TransformerWeights>(load_target(c.target.checkpoint));
}

// The target used for decoding: the trained one, inflated when configured.
std::shared_ptr<const TransformerWeights> decoding_target(const EngineConfig& c,
                                                          std::shared_ptr<const TransformerWeights> base) {
  if (c.target.inflate_layers == 0 && c.target.inflate_ffn == 0) return base;
  const std::size_t ffn = std::max(c.target.inflate_ffn, base->config.ffn_dim);
  return std::make_shared<const TransformerWeights>(
      inflate_inert(*base, c.target.inflate_layers, ffn, base->config.seed + 1));
}

DraftInputMode selected_input(const EngineConfig& c, const Options& o) {
  return o.draft_input.empty() ? c.draft.input : parse_draft_input_mode(o.draft_input);
}

fs::path head_path(const EngineConfig& c, const Options& o) {
  if (c.draft.checkpoint.empty()) throw ValidationError("draft.checkpoint is not set in the config");
  return o.draft_input.empty() ? c.draft.checkpoint
                               : draft_variant_path(c.draft.checkpoint, parse_draft_input_mode(o.draft_input));
}

std::shared_ptr<const DraftHeadWeights> load_head(const EngineConfig& c, const Options& o,
                                                  const TransformerWeights& base) {
  if (o.untrained) {
    return std::make_shared<const DraftHeadWeights>(init_draft_head(base, selected_input(c, o), c.draft.training.seed));
  }
  const fs::path path = head_path(c, o);
  require(path, "draft checkpoint");
  return std::make_shared<const DraftHeadWeights>(load_draft_head(path, base));
}

void apply_generation_flags(const Options& o, GenerationParams& g) {
  if (!o.mode.empty()) g.mode = parse_decode_mode(o.mode);
  if (o.gamma) g.gamma = *o.gamma;
  if (o.temperature) g.temperature = static_cast<real>(*o.temperature);
  if (o.max_new_tokens) g.max_new_tokens = *o.max_new_tokens;
  if (o.seed) g.seed = *o.seed;
  if (!o.branching.empty()) g.topology.branching = o.branching;
  if (o.budget) g.topology.budget = *o.budget;
  g.topology.validate();
  g.validate();
}

void ensure_parent(const fs::path& path) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  write_file_atomic(path, text);
}

int cmd_make_corpus(const Options& o) {
  if (o.out.empty()) throw UsageError("make-corpus needs --out");
  if (o.corpus_size == 0) throw UsageError("--size must be >= 1");
  write_text(o.out, synthetic_corpus_jsonl(o.corpus_seed, o.corpus_size));
  const Corpus c = ingest_corpus(o.out);
  std::cout << "wrote " << o.out << ": " << c.sequences.size() << " documents, " << c.total_tokens() << " tokens\n";
  return 0;
}

int cmd_train_target(const Options& o) {
  EngineConfig c = load_config(o);
  if (!o.corpus.empty()) c.corpus.path = o.corpus;
  if (!o.out.empty()) c.target.checkpoint = o.out;
  if (!o.curve.empty()) c.target.curve = o.curve;
  if (o.epochs) c.target.training.epochs = *o.epochs;
  if (o.lr) c.target.training.lr = static_cast<real>(*o.lr);
  if (o.seed) c.target.training.seed = *o.seed;
  c.target.training.validate();
  if (c.target.checkpoint.empty()) throw ValidationError("target.checkpoint is not set (config or --out)");
  auto [train, held] = load_split(c, c.target.model.vocab_size);

  const auto start = std::chrono::steady_clock::now();
  TargetTrainResult r = train_target_toy(train, c.target.model, c.target.training);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const TargetEval eval = evaluate_target(*r.weights, held);
  ensure_parent(c.target.checkpoint);
  save_target(c.target.checkpoint, *r.weights);
  if (!c.target.curve.empty()) write_text(c.target.curve, target_curve_csv(r.curve));
  std::cout << "trained target in " << secs << " s over " << r.curve.size() << " steps\n";
  for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) std::cout << "  epoch " << e + 1 << " loss " << r.epoch_loss[e] << "\n";
  std::cout << "held-out loss " << eval.mean_loss << " nats, perplexity " << eval.perplexity << "\n";
  std::cout << "wrote " << c.target.checkpoint.string() << "\n";
  return 0;
}

int cmd_train_draft(const Options& o) {
  EngineConfig c = load_config(o);
  if (!o.corpus.empty()) c.corpus.path = o.corpus;
  if (o.epochs) c.draft.training.epochs = *o.epochs;
  if (o.lr) c.draft.training.lr = static_cast<real>(*o.lr);
  if (o.seed) c.draft.training.seed = *o.seed;
  if (!o.data_mode.empty()) c.draft.training.data_mode = parse_data_mode(o.data_mode);
  c.draft.training.validate();
  const DraftInputMode mode = selected_input(c, o);
  fs::path out = o.out.empty() ? head_path(c, o) : fs::path(o.out);
  fs::path curve = o.curve.empty() ? c.draft.curve : fs::path(o.curve);
  if (o.out.empty() && !o.draft_input.empty() && !curve.empty()) curve = draft_variant_path(curve, mode);

  auto base = load_base_target(c);
  auto [train, held] = load_split(c, base->config.vocab_size);
  const auto start = std::chrono::steady_clock::now();
  const TrainingPairs pairs = collect_training_pairs(*base, train, c.draft.training.data_mode);
  DraftTrainResult r = train_draft_head(*base, pairs, mode, c.draft.training);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ensure_parent(out);
  save_draft_head(out, *r.head);
  if (!curve.empty()) write_text(curve, curve_csv(r.curve));

  EagleDrafter drafter(r.head);
  AlphaOptions ao;
  ao.max_n = 0;
  ao.positions = c.alpha.positions;
  ao.min_prefix = c.alpha.min_prefix;
  ao.seed = c.alpha.seed;
  const AlphaResult a0 = compute_alpha_table(*base, drafter, held, ao).front();
  std::cout << "trained " << draft_input_mode_name(mode) << " head (" << data_mode_name(c.draft.training.data_mode)
            << ", " << pairs.trained_pairs() << " pairs) in " << secs << " s\n";
  std::cout << "loss " << r.initial_loss << " -> " << r.final_loss << "; held-out greedy 0-alpha " << a0.alpha
            << " over " << a0.evaluated << " positions\n";
  std::cout << "wrote " << out.string() << "\n";
  return 0;
}

std::vector<TokenId> prompt_tokens(const Options& o) {
  if (!o.prompt.empty() && !o.prompt_tokens.empty()) throw UsageError("give --prompt or --prompt-tokens, not both");
  if (!o.prompt_tokens.empty()) return {o.prompt_tokens.begin(), o.prompt_tokens.end()};
  if (o.prompt.empty()) throw UsageError("generate needs --prompt or --prompt-tokens");
  return byte_tokenize(o.prompt);
}

int cmd_generate(const Options& o) {
  EngineConfig c = load_config(o);
  apply_generation_flags(o, c.generation);
  const std::vector<TokenId> prompt = prompt_tokens(o);
  auto base = load_base_target(c);
  auto target = decoding_target(c, base);
  std::unique_ptr<EagleDrafter> drafter;
  if (c.generation.mode != DecodeMode::kVanilla) drafter = std::make_unique<EagleDrafter>(load_head(c, o, *base));
  GenerationResult r = generate(target, drafter.get(), prompt, c.generation);
  if (o.print_tokens) {
    for (std::size_t i = 0; i < r.tokens.size(); ++i) std::cout << (i ? " " : "") << r.tokens[i];
    std::cout << "\n";
  } else {
    std::cout << byte_detokenize(r.tokens) << "\n";
  }
  if (!o.log.empty()) write_text(o.log, r.log.to_json().dump(2) + "\n");
  std::cerr << decode_mode_name(c.generation.mode) << ": " << r.tokens.size() << " tokens in " << r.log.rounds.size()
            << " rounds";
  if (c.generation.mode != DecodeMode::kVanilla && r.log.rounds.size() > 1) {
    std::cerr << ", tau " << compute_tau(std::span(&r.log, 1)).variant_a;
  }
  std::cerr << (r.log.truncated ? " (truncated: " + r.log.truncation_reason + ")" : "") << "\n";
  return 0;
}

std::vector<std::vector<TokenId>> bench_prompts(const Corpus& held, std::size_t count, std::size_t length) {
  std::vector<std::vector<TokenId>> out;
  for (const auto& seq : held.sequences) {
    if (out.size() == count) break;
    if (seq.size() > length) out.emplace_back(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(length));
  }
  if (out.size() < count) {
    throw ValidationError("held-out corpus has only " + std::to_string(out.size()) + " sequences longer than " +
                          std::to_string(length) + " tokens; " + std::to_string(count) + " prompts requested");
  }
  return out;
}

void apply_bench_flags(const Options& o, EngineConfig& c) {
  if (o.repetitions) c.bench.repetitions = *o.repetitions;
  if (o.warmup) c.bench.warmup = *o.warmup;
  if (o.prompts) c.bench.prompts = *o.prompts;
  if (o.max_new_tokens) c.bench.max_new_tokens = *o.max_new_tokens;
  if (o.seed) c.bench.seed = *o.seed;
  if (o.temperature) c.bench.temperatures = {static_cast<real>(*o.temperature)};
  if (o.gamma) c.generation.gamma = *o.gamma;
  if (!o.branching.empty()) c.generation.topology.branching = o.branching;
  if (o.budget) c.generation.topology.budget = *o.budget;
  if (!o.modes.empty()) {
    c.bench.modes.clear();
    for (const auto& m : o.modes) c.bench.modes.push_back(parse_decode_mode(m));
  }
  if (o.positions) c.alpha.positions = *o.positions;
  c.generation.topology.validate();
}

int run_bench(const Options& o, EngineConfig c, bool alpha_table) {
  apply_bench_flags(o, c);
  if (alpha_table && o.modes.empty()) c.bench.modes = {DecodeMode::kChain};
  auto base = load_base_target(c);
  auto target = decoding_target(c, base);
  EagleDrafter drafter(load_head(c, o, *base));
  auto [train, held] = load_split(c, base->config.vocab_size);
  const auto prompts = bench_prompts(held, c.bench.prompts, c.bench.prompt_length);

  BenchOptions bo;
  bo.max_new_tokens = c.bench.max_new_tokens;
  bo.repetitions = c.bench.repetitions;
  bo.warmup = c.bench.warmup;
  bo.seed = c.bench.seed;
  for (real t : c.bench.temperatures) {
    for (DecodeMode m : c.bench.modes) bo.settings.push_back({m, t, c.generation.gamma, c.generation.topology});
  }
  BenchReport report = speedup_benchmark(target, &drafter, prompts, bo);
  if (alpha_table || !o.no_alpha) {
    AlphaOptions ao;
    ao.max_n = c.alpha.max_n;
    ao.positions = c.alpha.positions;
    ao.min_prefix = c.alpha.min_prefix;
    ao.seed = c.alpha.seed;
    attach_alpha(report, *target, drafter, held, ao);
  }
  std::cout << report.to_table();
  std::cout << "prompts " << report.prompts << ", max_new_tokens " << report.max_new_tokens << ", median of "
            << report.repetitions << " after " << report.warmup << " warmup; target " << report.target_hash
            << (target != base ? " (inflated)" : "") << "\n";
  const fs::path out = !o.out.empty() ? fs::path(o.out) : alpha_table ? c.alpha.report : c.bench.report;
  if (!out.empty()) {
    write_text(out, report.to_json().dump(2) + "\n");
    std::cout << "wrote " << out.string() << "\n";
  }
  if (!report.mechanism_ok()) {
    std::cerr << "mechanism check failed: a round used more than one target forward or the wrong draft count\n";
    return kExitRuntime;
  }
  return 0;
}

int cmd_audit(const Options& o) {
  EngineConfig c = load_config(o);
  if (o.trials) c.audit.trials = *o.trials;
  if (o.temperature) c.audit.temperature = static_cast<real>(*o.temperature);
  if (!o.mode.empty()) c.audit.mode = parse_decode_mode(o.mode);
  if (o.seed) c.audit.seed = *o.seed;
  if (!o.branching.empty()) c.generation.topology.branching = o.branching;
  if (o.budget) c.generation.topology.budget = *o.budget;
  if (o.gamma) c.generation.gamma = *o.gamma;
  if (c.audit.mode == DecodeMode::kVanilla) throw UsageError("audit needs --mode chain or tree");
  if (c.audit.trials < 10000) std::cerr << "warning: fewer than 10^4 trials per context\n";
  auto base = load_base_target(c);
  auto target = decoding_target(c, base);
  EagleDrafter drafter(load_head(c, o, *base));
  auto [train, held] = load_split(c, base->config.vocab_size);
  const std::size_t total = c.audit.contexts + c.audit.second_token_contexts;
  auto ctxs = audit_contexts(*target, drafter, held, total, c.audit.context_length, c.audit.temperature, c.audit.seed);
  std::vector<std::vector<TokenId>> second(ctxs.begin() + static_cast<std::ptrdiff_t>(std::min(c.audit.contexts, ctxs.size())),
                                           ctxs.end());
  ctxs.resize(std::min(c.audit.contexts, ctxs.size()));

  AuditOptions ao;
  ao.mode = c.audit.mode;
  ao.gamma = c.generation.gamma;
  ao.topology = c.generation.topology;
  ao.temperature = c.audit.temperature;
  ao.trials = c.audit.trials;
  ao.seed = c.audit.seed;
  ao.clamp_acceptance = !o.mutate;
  const AuditReport report = lossless_audit(target, drafter, ctxs, second, ao);
  std::cout << report.to_text();
  fs::path out = o.out.empty() ? c.audit.report : fs::path(o.out);
  if (o.mutate && o.out.empty() && !out.empty()) out.replace_extension(".mutated" + out.extension().string());
  if (!out.empty()) {
    write_text(out, report.to_json().dump(2) + "\n");
    std::cout << "wrote " << out.string() << "\n";
  }
  if (!report.pass) {
    std::cerr << "lossless audit FAILED: max TVD " << report.max_tvd << ", min p-value " << report.min_p_value << "\n";
    return kExitAudit;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eaglet: feature-level speculative decoding on toy transformers"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile); };
  auto add_draft_input = [&](CLI::App* sub) {
    sub->add_option("--draft-input", o.draft_input,
                    "Draft input variant: shifted, unshifted, token or feature (selects draft.<variant> checkpoint)");
  };
  auto add_generation = [&](CLI::App* sub) {
    sub->add_option("--gamma", o.gamma, "Chain draft length");
    sub->add_option("--temperature", o.temperature, "Sampling temperature (0 = greedy)");
    sub->add_option("--branching", o.branching, "Tree branching per depth, e.g. 4,2,1")->delimiter(',');
    sub->add_option("--budget", o.budget, "Tree node budget");
    sub->add_option("--seed", o.seed, "Seed override");
  };

  auto* make = app.add_subcommand("make-corpus", "Write a synthetic-grammar JSONL corpus");
  make->add_option("--out", o.out, "Output path")->required();
  make->add_option("--seed", o.corpus_seed, "Grammar seed");
  make->add_option("--size", o.corpus_size, "Minimum total tokens");

  auto* ttarget = app.add_subcommand("train-target", "Train the toy target model");
  add_config(ttarget);
  ttarget->add_option("--corpus", o.corpus, "Corpus override");
  ttarget->add_option("--out", o.out, "Checkpoint path override");
  ttarget->add_option("--curve", o.curve, "Loss curve CSV override");
  ttarget->add_option("--epochs", o.epochs);
  ttarget->add_option("--lr", o.lr);
  ttarget->add_option("--seed", o.seed);

  auto* tdraft = app.add_subcommand("train-draft", "Train a draft head against the frozen target");
  add_config(tdraft);
  add_draft_input(tdraft);
  tdraft->add_option("--data-mode", o.data_mode, "fixed_dataset or target_generated");
  tdraft->add_option("--corpus", o.corpus, "Corpus override");
  tdraft->add_option("--out", o.out, "Checkpoint path override");
  tdraft->add_option("--curve", o.curve, "Loss curve CSV override");
  tdraft->add_option("--epochs", o.epochs);
  tdraft->add_option("--lr", o.lr);
  tdraft->add_option("--seed", o.seed);

  auto* gen = app.add_subcommand("generate", "Decode from a prompt");
  add_config(gen);
  add_draft_input(gen);
  add_generation(gen);
  gen->add_option("--prompt", o.prompt, "UTF-8 prompt text");
  gen->add_option("--prompt-tokens", o.prompt_tokens, "Prompt token ids, comma separated")->delimiter(',');
  gen->add_option("--mode", o.mode, "vanilla, chain or tree");
  gen->add_option("--max-new-tokens", o.max_new_tokens);
  gen->add_option("--log", o.log, "Write the RunLog JSON here");
  gen->add_flag("--tokens", o.print_tokens, "Print token ids instead of text");

  auto* bench = app.add_subcommand("bench", "Speedup benchmark with tau and n-alpha");
  auto* alpha = app.add_subcommand("alpha-table", "tau, 0-alpha..4-alpha and speedup for chain drafting");
  for (auto* sub : {bench, alpha}) {
    add_config(sub);
    add_draft_input(sub);
    add_generation(sub);
    sub->add_option("--out", o.out, "Report JSON path override");
    sub->add_option("--repetitions", o.repetitions);
    sub->add_option("--warmup", o.warmup);
    sub->add_option("--prompts", o.prompts);
    sub->add_option("--max-new-tokens", o.max_new_tokens);
    sub->add_option("--modes", o.modes, "Comma-separated modes, e.g. chain,tree")->delimiter(',');
    sub->add_option("--positions", o.positions, "n-alpha evaluation positions");
  }
  bench->add_flag("--no-alpha", o.no_alpha, "Skip the n-alpha columns");

  auto* audit = app.add_subcommand("audit", "Statistical lossless audit at T > 0");
  add_config(audit);
  add_draft_input(audit);
  add_generation(audit);
  audit->add_option("--mode", o.mode, "chain or tree");
  audit->add_option("--trials", o.trials, "Trials per context");
  audit->add_option("--out", o.out, "Report JSON path override");
  audit->add_flag("--mutate", o.mutate, "Negative control: drop the min clamp in the acceptance rule");
  audit->add_flag("--untrained", o.untrained, "Audit a freshly initialized head");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (make->parsed()) return cmd_make_corpus(o);
    if (ttarget->parsed()) return cmd_train_target(o);
    if (tdraft->parsed()) return cmd_train_draft(o);
    if (gen->parsed()) return cmd_generate(o);
    if (bench->parsed()) return run_bench(o, load_config(o), false);
    if (alpha->parsed()) return run_bench(o, load_config(o), true);
    if (audit->parsed()) return cmd_audit(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
