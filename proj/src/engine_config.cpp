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


#include "eaglet/engine_config.hpp"

#include "eaglet/checkpoint.hpp"
#include "eaglet/errors.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Reads j[key] into out when present; type errors name the key.
template <typename T>
void read(const json& j, const std::string& key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + "." + key + ": wrong type (" + j.at(key).dump() + ")");
  }
}

void read_path(const json& j, const std::string& key, fs::path& out, const fs::path& base, const std::string& where) {
  std::string text;
  read(j, key, text, where);
  if (text.empty()) return;
  const fs::path p(text);
  out = (p.is_absolute() || base.empty() ? p : base / p).lexically_normal();
}

const json& section(const json& j, const std::string& key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ValidationError(key + ": expected an object");
  return j.at(key);
}

std::vector<DecodeMode> read_modes(const json& j, const std::string& where, std::vector<DecodeMode> fallback) {
  if (!j.contains("modes")) return fallback;
  std::vector<std::string> names;
  read(j, "modes", names, where);
  std::vector<DecodeMode> out;
  for (const auto& n : names) out.push_back(parse_decode_mode(n));
  return out;
}

std::string str(const fs::path& p) { return p.string(); }

}  // namespace

EngineConfig EngineConfig::from_json(const json& j, const fs::path& base) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  reject_unknown_keys(j, {"corpus", "target", "draft", "generation", "tree", "bench", "audit", "alpha"}, "config");
  EngineConfig c;

  const json& corpus = section(j, "corpus");
  reject_unknown_keys(corpus, {"path", "held_out_fraction"}, "corpus");
  read_path(corpus, "path", c.corpus.path, base, "corpus");
  read(corpus, "held_out_fraction", c.corpus.held_out_fraction, "corpus");
  if (!(c.corpus.held_out_fraction > 0 && c.corpus.held_out_fraction < 1)) {
    throw ValidationError("corpus.held_out_fraction must lie in (0, 1)");
  }

  const json& target = section(j, "target");
  reject_unknown_keys(target, {"checkpoint", "curve", "model", "training", "inflate"}, "target");
  read_path(target, "checkpoint", c.target.checkpoint, base, "target");
  read_path(target, "curve", c.target.curve, base, "target");
  if (target.contains("model")) c.target.model = model_config_from_json(target.at("model"));
  if (target.contains("training")) c.target.training = TargetTrainConfig::from_json(target.at("training"));
  const json& inflate = section(target, "inflate");
  reject_unknown_keys(inflate, {"extra_layers", "ffn_dim"}, "target.inflate");
  read(inflate, "extra_layers", c.target.inflate_layers, "target.inflate");
  read(inflate, "ffn_dim", c.target.inflate_ffn, "target.inflate");

  const json& draft = section(j, "draft");
  reject_unknown_keys(draft, {"checkpoint", "curve", "input", "training"}, "draft");
  read_path(draft, "checkpoint", c.draft.checkpoint, base, "draft");
  read_path(draft, "curve", c.draft.curve, base, "draft");
  if (draft.contains("input")) {
    std::string mode;
    read(draft, "input", mode, "draft");
    c.draft.input = parse_draft_input_mode(mode);
  }
  if (draft.contains("training")) c.draft.training = TrainConfig::from_json(draft.at("training"));

  const json& gen = section(j, "generation");
  reject_unknown_keys(gen, {"mode", "temperature", "max_new_tokens", "gamma", "seed"}, "generation");
  if (gen.contains("mode")) {
    std::string mode;
    read(gen, "mode", mode, "generation");
    c.generation.mode = parse_decode_mode(mode);
  }
  read(gen, "temperature", c.generation.temperature, "generation");
  read(gen, "max_new_tokens", c.generation.max_new_tokens, "generation");
  read(gen, "gamma", c.generation.gamma, "generation");
  read(gen, "seed", c.generation.seed, "generation");

  const json& tree = section(j, "tree");
  reject_unknown_keys(tree, {"branching", "budget"}, "tree");
  read(tree, "branching", c.generation.topology.branching, "tree");
  read(tree, "budget", c.generation.topology.budget, "tree");
  c.generation.topology.validate();
  try {
    c.generation.validate();
  } catch (const UsageError& e) {
    throw ValidationError(std::string("generation: ") + e.what());
  }

  const json& bench = section(j, "bench");
  reject_unknown_keys(bench,
                      {"prompts", "prompt_length", "max_new_tokens", "repetitions", "warmup", "temperatures", "modes",
                       "seed", "report"},
                      "bench");
  read(bench, "prompts", c.bench.prompts, "bench");
  read(bench, "prompt_length", c.bench.prompt_length, "bench");
  read(bench, "max_new_tokens", c.bench.max_new_tokens, "bench");
  read(bench, "repetitions", c.bench.repetitions, "bench");
  read(bench, "warmup", c.bench.warmup, "bench");
  read(bench, "temperatures", c.bench.temperatures, "bench");
  c.bench.modes = read_modes(bench, "bench", c.bench.modes);
  read(bench, "seed", c.bench.seed, "bench");
  read_path(bench, "report", c.bench.report, base, "bench");
  if (c.bench.repetitions == 0 || c.bench.prompts == 0 || c.bench.prompt_length < 2) {
    throw ValidationError("bench: prompts and repetitions must be >= 1 and prompt_length >= 2");
  }

  const json& audit = section(j, "audit");
  reject_unknown_keys(audit,
                      {"trials", "contexts", "second_token_contexts", "context_length", "temperature", "mode", "seed",
                       "report"},
                      "audit");
  read(audit, "trials", c.audit.trials, "audit");
  read(audit, "contexts", c.audit.contexts, "audit");
  read(audit, "second_token_contexts", c.audit.second_token_contexts, "audit");
  read(audit, "context_length", c.audit.context_length, "audit");
  read(audit, "temperature", c.audit.temperature, "audit");
  if (audit.contains("mode")) {
    std::string mode;
    read(audit, "mode", mode, "audit");
    c.audit.mode = parse_decode_mode(mode);
  }
  read(audit, "seed", c.audit.seed, "audit");
  read_path(audit, "report", c.audit.report, base, "audit");
  if (!(c.audit.temperature > 0)) throw ValidationError("audit.temperature must be > 0");
  if (c.audit.mode == DecodeMode::kVanilla) throw ValidationError("audit.mode must be chain or tree");

  const json& alpha = section(j, "alpha");
  reject_unknown_keys(alpha, {"positions", "min_prefix", "max_n", "seed", "report"}, "alpha");
  read(alpha, "positions", c.alpha.positions, "alpha");
  read(alpha, "min_prefix", c.alpha.min_prefix, "alpha");
  read(alpha, "max_n", c.alpha.max_n, "alpha");
  read(alpha, "seed", c.alpha.seed, "alpha");
  read_path(alpha, "report", c.alpha.report, base, "alpha");
  if (c.alpha.max_n > 4) throw ValidationError("alpha.max_n must be <= 4");
  return c;
}

EngineConfig EngineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

json EngineConfig::to_json() const {
  std::vector<std::string> bench_modes;
  for (DecodeMode m : bench.modes) bench_modes.push_back(decode_mode_name(m));
  return {
      {"corpus", {{"path", str(corpus.path)}, {"held_out_fraction", corpus.held_out_fraction}}},
      {"target",
       {{"checkpoint", str(target.checkpoint)},
        {"curve", str(target.curve)},
        {"model", model_config_to_json(target.model)},
        {"training", target.training.to_json()},
        {"inflate", {{"extra_layers", target.inflate_layers}, {"ffn_dim", target.inflate_ffn}}}}},
      {"draft",
       {{"checkpoint", str(draft.checkpoint)},
        {"curve", str(draft.curve)},
        {"input", draft_input_mode_name(draft.input)},
        {"training", draft.training.to_json()}}},
      {"generation",
       {{"mode", decode_mode_name(generation.mode)},
        {"temperature", generation.temperature},
        {"max_new_tokens", generation.max_new_tokens},
        {"gamma", generation.gamma},
        {"seed", generation.seed}}},
      {"tree", {{"branching", generation.topology.branching}, {"budget", generation.topology.budget}}},
      {"bench",
       {{"prompts", bench.prompts},
        {"prompt_length", bench.prompt_length},
        {"max_new_tokens", bench.max_new_tokens},
        {"repetitions", bench.repetitions},
        {"warmup", bench.warmup},
        {"temperatures", bench.temperatures},
        {"modes", bench_modes},
        {"seed", bench.seed},
        {"report", str(bench.report)}}},
      {"audit",
       {{"trials", audit.trials},
        {"contexts", audit.contexts},
        {"second_token_contexts", audit.second_token_contexts},
        {"context_length", audit.context_length},
        {"temperature", audit.temperature},
        {"mode", decode_mode_name(audit.mode)},
        {"seed", audit.seed},
        {"report", str(audit.report)}}},
      {"alpha",
       {{"positions", alpha.positions},
        {"min_prefix", alpha.min_prefix},
        {"max_n", alpha.max_n},
        {"seed", alpha.seed},
        {"report", str(alpha.report)}}},
  };
}

std::string draft_input_short_name(DraftInputMode mode) {
  switch (mode) {
    case DraftInputMode::kFeatureShiftedToken:
      return "shifted";
    case DraftInputMode::kFeatureUnshiftedToken:
      return "unshifted";
    case DraftInputMode::kTokenOnly:
      return "token";
    case DraftInputMode::kFeatureOnly:
      return "feature";
  }
  throw UsageError("unknown draft input mode");
}

fs::path draft_variant_path(const fs::path& path, DraftInputMode mode) {
  fs::path out = path;
  out.replace_filename(path.stem().string() + "." + draft_input_short_name(mode) + path.extension().string());
  return out;
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
