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


#include "eaglet/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eaglet/checkpoint.hpp"
#include "eaglet/errors.hpp"
#include "eaglet/rng.hpp"
#include "json.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

std::size_t Corpus::total_tokens() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

void Corpus::validate(std::size_t vocab_size) const {
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    if (sequences[i].empty()) throw ValidationError("corpus sequence " + std::to_string(i) + " is empty");
    for (TokenId t : sequences[i]) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
        throw ValidationError("corpus sequence " + std::to_string(i) + ": token " + std::to_string(t) +
                              " outside vocabulary of " + std::to_string(vocab_size));
      }
    }
  }
}

std::vector<TokenId> byte_tokenize(std::string_view text) {
  std::vector<TokenId> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(static_cast<TokenId>(static_cast<unsigned char>(c)));
  return out;
}

std::string byte_detokenize(std::span<const TokenId> tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (TokenId t : tokens) out.push_back(t >= 0 && t < 256 ? static_cast<char>(t) : '?');
  return out;
}

Corpus parse_corpus(const std::string& contents, std::size_t vocab_size, const std::string& source) {
  Corpus corpus;
  corpus.source = source;
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + "malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object() || j.size() != 1 || !(j.contains("tokens") || j.contains("text"))) {
      throw ValidationError(where + "expected an object with exactly one of \"tokens\" or \"text\"");
    }
    std::vector<TokenId> seq;
    if (j.contains("text")) {
      if (!j["text"].is_string()) throw ValidationError(where + "\"text\" must be a string");
      seq = byte_tokenize(j["text"].get<std::string>());
    } else {
      if (!j["tokens"].is_array()) throw ValidationError(where + "\"tokens\" must be an array");
      for (const auto& v : j["tokens"]) {
        if (!v.is_number_integer()) throw ValidationError(where + "token ids must be integers");
        const auto id = v.get<std::int64_t>();
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
          throw ValidationError(where + "token " + std::to_string(id) + " outside vocabulary of " +
                                std::to_string(vocab_size));
        }
        seq.push_back(static_cast<TokenId>(id));
      }
    }
    if (seq.empty()) throw ValidationError(where + "empty sequence");
    for (TokenId t : seq) {
      if (static_cast<std::size_t>(t) >= vocab_size) {
        throw ValidationError(where + "byte " + std::to_string(t) + " outside vocabulary of " +
                              std::to_string(vocab_size));
      }
    }
    corpus.sequences.push_back(std::move(seq));
  }
  if (corpus.sequences.empty()) throw ValidationError(source + ": empty corpus");
  return corpus;
}

Corpus ingest_corpus(const std::filesystem::path& path, std::size_t vocab_size) {
  if (!std::filesystem::exists(path)) throw ValidationError("corpus file not found: " + path.string());
  return parse_corpus(read_file(path), vocab_size, path.string());
}

namespace {

struct Grammar {
  std::vector<std::string> names{"ada", "bo", "cy", "dee", "eli", "fay"};
  std::vector<std::string> nouns{"cat", "dog", "bird", "fox", "owl", "frog", "mouse", "horse"};
  std::vector<std::string> places{"garden", "river", "forest", "house", "market", "hill"};
  std::vector<std::string> adjectives{"small", "red", "quiet", "old", "happy", "green", "tired"};
  std::vector<std::string> verbs{"sees", "finds", "likes", "follows", "calls", "feeds"};
  std::vector<std::string> intransitive{"sleeps", "runs", "sings", "waits", "jumps"};
  std::vector<std::string> adverbs{"slowly", "again", "today", "quickly", "at night"};
};

// Skewed choice: earlier entries are likelier (weights 1/(i+1)).
const std::string& pick(const std::vector<std::string>& options, Rng& rng) {
  double total = 0;
  for (std::size_t i = 0; i < options.size(); ++i) total += 1.0 / static_cast<double>(i + 1);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < options.size(); ++i) {
    u -= 1.0 / static_cast<double>(i + 1);
    if (u < 0) return options[i];
  }
  return options.back();
}

std::string noun_phrase(const Grammar& g, Rng& rng) {
  std::string np = rng.uniform() < 0.7 ? "the " : "a ";
  if (rng.uniform() < 0.5) np += pick(g.adjectives, rng) + " ";
  return np + pick(g.nouns, rng);
}

std::string sentence(const Grammar& g, Rng& rng) {
  const double u = rng.uniform();
  std::string s;
  if (u < 0.3) {
    s = noun_phrase(g, rng) + " " + pick(g.verbs, rng) + " " + noun_phrase(g, rng);
  } else if (u < 0.5) {
    s = pick(g.names, rng) + " " + pick(g.verbs, rng) + " " + noun_phrase(g, rng) + " in the " + pick(g.places, rng);
  } else if (u < 0.7) {
    s = noun_phrase(g, rng) + " " + pick(g.intransitive, rng) + " " + pick(g.adverbs, rng);
  } else if (u < 0.85) {
    s = "when " + pick(g.names, rng) + " " + pick(g.intransitive, rng) + ", " + noun_phrase(g, rng) + " " +
        pick(g.verbs, rng) + " " + pick(g.names, rng);
  } else {
    s = "in the " + pick(g.places, rng) + " " + noun_phrase(g, rng) + " " + pick(g.intransitive, rng);
  }
  return s + ".";
}

}  // namespace

std::vector<std::string> synthetic_documents(std::uint64_t seed, std::size_t min_tokens) {
  const Grammar g;
  Rng rng(seed);
  std::vector<std::string> docs;
  std::size_t total = 0;
  while (total < min_tokens) {
    const std::size_t sentences = 3 + rng.below(5);
    std::string doc;
    for (std::size_t i = 0; i < sentences; ++i) doc += (i ? " " : "") + sentence(g, rng);
    total += doc.size();
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::string synthetic_corpus_jsonl(std::uint64_t seed, std::size_t min_tokens) {
  std::string out;
  for (const std::string& doc : synthetic_documents(seed, min_tokens)) {
    out += nlohmann::json{{"text", doc}}.dump() + "\n";
  }
  return out;
}

Corpus synthetic_corpus(std::uint64_t seed, std::size_t min_tokens) {
  Corpus corpus;
  corpus.source = "synthetic:" + std::to_string(seed);
  for (const std::string& doc : synthetic_documents(seed, min_tokens)) corpus.sequences.push_back(byte_tokenize(doc));
  return corpus;
}

std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double held_out_fraction) {
  if (!(held_out_fraction > 0 && held_out_fraction < 1)) throw UsageError("held-out fraction must be in (0, 1)");
  const auto every = static_cast<std::size_t>(std::max(2.0, std::round(1.0 / held_out_fraction)));
  Corpus train, held;
  train.source = held.source = corpus.source;
  train.tokenizer = held.tokenizer = corpus.tokenizer;
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    (i % every == every - 1 ? held : train).sequences.push_back(corpus.sequences[i]);
  }
  return {train, held};
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
