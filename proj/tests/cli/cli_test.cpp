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


// Drives the built command-line tool end to end on a tiny configuration.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "eaglet/checkpoint.hpp"
#include "eaglet/corpus.hpp"
#include "eaglet/engine.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("eaglet_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    nlohmann::json config = {
        {"corpus", {{"path", "corpus.jsonl"}, {"held_out_fraction", 0.25}}},
        {"target",
         {{"checkpoint", "target.eglc"},
          {"curve", "target_curve.csv"},
          {"model",
           {{"vocab_size", 256}, {"hidden_dim", 32}, {"num_layers", 1}, {"num_heads", 2}, {"ffn_dim", 48},
            {"max_positions", 128}, {"seed", 2}}},
          {"training", {{"epochs", 6}, {"window", 64}, {"lr", 0.003}}}}},
        {"draft",
         {{"checkpoint", "draft.eglc"}, {"curve", "draft_curve.csv"}, {"training", {{"epochs", 1}, {"lr", 0.001}}}}},
        {"generation", {{"max_new_tokens", 40}}},
        {"bench", {{"prompts", 2}, {"prompt_length", 16}, {"max_new_tokens", 16}, {"repetitions", 1}, {"warmup", 0}}},
        {"audit", {{"trials", 60000}, {"contexts", 2}, {"second_token_contexts", 1}, {"context_length", 24}}},
        {"alpha", {{"positions", 30}, {"min_prefix", 8}}}};
    std::ofstream(dir_ / "tiny.json") << config.dump(2);
    ASSERT_EQ(run("make-corpus --out " + q(dir_ / "corpus.jsonl") + " --seed 4 --size 8000").code, 0);
    ASSERT_EQ(run("train-target --config " + q(dir_ / "tiny.json")).code, 0);
    ASSERT_EQ(run("train-draft --config " + q(dir_ / "tiny.json")).code, 0);
  }

  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

  static CliRun run(const std::string& args) {
    const fs::path capture = dir_ / "stdout.txt";
    const std::string cmd = std::string(EAGLET_CLI_PATH) + " " + args + " > " + q(capture) + " 2> " +
                            q(dir_ / "stderr.txt");
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = eaglet::read_file(capture);
    return r;
  }

  static std::string err() { return eaglet::read_file(dir_ / "stderr.txt"); }
  static std::string config() { return " --config " + q(dir_ / "tiny.json"); }

  static inline fs::path dir_;
};

TEST_F(CliTest, MakeCorpusIsDeterministicAndIngestible) {
  ASSERT_EQ(run("make-corpus --out " + q(dir_ / "a.jsonl") + " --seed 9 --size 1000").code, 0);
  ASSERT_EQ(run("make-corpus --out " + q(dir_ / "b.jsonl") + " --seed 9 --size 1000").code, 0);
  EXPECT_EQ(eaglet::read_file(dir_ / "a.jsonl"), eaglet::read_file(dir_ / "b.jsonl"));
  EXPECT_GE(eaglet::ingest_corpus(dir_ / "a.jsonl").total_tokens(), 1000u);
}

TEST_F(CliTest, TrainingIsReproducible) {
  ASSERT_EQ(run("train-target" + config() + " --out " + q(dir_ / "again.eglc")).code, 0);
  EXPECT_EQ(eaglet::read_file(dir_ / "again.eglc"), eaglet::read_file(dir_ / "target.eglc"));
  ASSERT_EQ(run("train-draft" + config() + " --out " + q(dir_ / "draft_again.eglc")).code, 0);
  EXPECT_EQ(eaglet::read_file(dir_ / "draft_again.eglc"), eaglet::read_file(dir_ / "draft.eglc"));
  EXPECT_TRUE(fs::exists(dir_ / "target_curve.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "draft_curve.csv"));
}

TEST_F(CliTest, MissingCorpusFailsCleanly) {
  const CliRun r = run("train-target" + config() + " --corpus " + q(dir_ / "nope.jsonl") + " --out " +
                    q(dir_ / "partial.eglc"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(err().find("nope.jsonl"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "partial.eglc"));
}

TEST_F(CliTest, StrictConfigRejectsUnknownKeys) {
  std::ofstream(dir_ / "bad.json") << R"({"generation": {"mode": "tree", "temprature": 1}})";
  const CliRun r = run("generate --config " + q(dir_ / "bad.json") + " --prompt hi");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(err().find("temprature"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitWithOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("generate --bogus").code, 1);
  EXPECT_EQ(run("generate" + config()).code, 1);  // no prompt
  EXPECT_EQ(run("generate" + config() + " --prompt x --mode sideways").code, 1);
}

TEST_F(CliTest, TreeMatchesVanillaAtTemperatureZero) {
  const CliRun vanilla = run("generate" + config() + " --prompt 'the cat' --mode vanilla");
  const CliRun tree = run("generate" + config() + " --prompt 'the cat' --mode tree");
  ASSERT_EQ(vanilla.code, 0);
  ASSERT_EQ(tree.code, 0);
  EXPECT_EQ(vanilla.out, tree.out);
  EXPECT_GT(vanilla.out.size(), 30u);
}

TEST_F(CliTest, ChainLogRespectsGammaAndSeedsRepeat) {
  const fs::path log = dir_ / "chain.json";
  const std::string args = "generate" + config() + " --prompt 'a bird' --mode chain --gamma 4 --temperature 1 --seed 5";
  const CliRun first = run(args + " --log " + q(log));
  ASSERT_EQ(first.code, 0);
  const eaglet::RunLog parsed = eaglet::RunLog::from_json(nlohmann::json::parse(eaglet::read_file(log)));
  ASSERT_FALSE(parsed.rounds.empty());
  for (const auto& round : parsed.rounds) EXPECT_LE(round.accepted, 4u);
  EXPECT_EQ(run(args).out, first.out);
}

TEST_F(CliTest, AuditPassesAndMutationFails) {
  EXPECT_EQ(run("audit" + config() + " --untrained").code, 0) << err();
  const CliRun mutated = run("audit" + config() + " --untrained --mutate");
  EXPECT_EQ(mutated.code, 3);
  EXPECT_NE(err().find("TVD"), std::string::npos);
}

TEST_F(CliTest, BenchAndAlphaTableWriteReports) {
  const fs::path bench = dir_ / "bench.json";
  ASSERT_EQ(run("bench" + config() + " --out " + q(bench)).code, 0) << err();
  const auto j = nlohmann::json::parse(eaglet::read_file(bench));
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_TRUE(j.at("mechanism_ok").get<bool>());
  EXPECT_EQ(j.at("records").size(), 6u);  // vanilla, chain, tree at two temperatures

  const fs::path alpha = dir_ / "alpha.json";
  const CliRun table = run("alpha-table" + config() + " --out " + q(alpha));
  ASSERT_EQ(table.code, 0) << err();
  EXPECT_NE(table.out.find("4-alpha"), std::string::npos);
  const auto a = nlohmann::json::parse(eaglet::read_file(alpha));
  for (const auto& rec : a.at("records")) {
    if (rec.at("mode") == "chain") EXPECT_EQ(rec.at("alpha").size(), 5u);
  }
}

TEST_F(CliTest, DraftInputAblationUsesVariantCheckpoints) {
  ASSERT_EQ(run("train-draft" + config() + " --draft-input token").code, 0) << err();
  EXPECT_TRUE(fs::exists(dir_ / "draft.token.eglc"));
  EXPECT_EQ(run("alpha-table" + config() + " --draft-input token --out " + q(dir_ / "alpha_token.json")).code, 0);
  EXPECT_EQ(run("alpha-table" + config() + " --draft-input feature").code, 1);  // not trained
}

}  // namespace
