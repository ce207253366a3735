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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eaglet/model.hpp"
#include "eaglet/real.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

inline constexpr std::size_t kByteVocab = 256;

struct Corpus {
  std::vector<std::vector<TokenId>> sequences;
  std::string source;
  std::string tokenizer = "byte";

  std::size_t total_tokens() const;
  // Throws ValidationError on empty sequences or ids >= vocab_size.
  void validate(std::size_t vocab_size) const;
};

std::vector<TokenId> byte_tokenize(std::string_view text);
// Ids outside [0, 256) render as '?'.
std::string byte_detokenize(std::span<const TokenId> tokens);

// JSON lines, each {"tokens": [...]} or {"text": "..."}; blank lines are
// skipped. Errors carry the 1-based line number.
Corpus parse_corpus(const std::string& contents, std::size_t vocab_size = kByteVocab,
                    const std::string& source = "<memory>");
Corpus ingest_corpus(const std::filesystem::path& path, std::size_t vocab_size = kByteVocab);

// Seeded documents from a small probabilistic English-like grammar, at least
// min_tokens bytes in total.
std::vector<std::string> synthetic_documents(std::uint64_t seed, std::size_t min_tokens);
// The same documents as JSON lines of {"text": ...}.
std::string synthetic_corpus_jsonl(std::uint64_t seed, std::size_t min_tokens);
Corpus synthetic_corpus(std::uint64_t seed, std::size_t min_tokens);

// Deterministic split: every k-th sequence (k = round(1 / fraction)) goes to
// the held-out part.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double held_out_fraction);

}  // namespace EAGLET_ABI
}  // namespace eaglet
