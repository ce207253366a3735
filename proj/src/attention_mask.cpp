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

#include "eaglet/attention_mask.hpp"

#include <algorithm>

#include "eaglet/errors.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

AttentionMask::AttentionMask(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), bits_(rows * cols, 0) {}

AttentionMask AttentionMask::causal(std::size_t rows, std::size_t prefix) {
  AttentionMask mask(rows, prefix + rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::fill_n(mask.bits_.begin() + static_cast<std::ptrdiff_t>(i * mask.cols_), prefix + i + 1, 1);
  }
  return mask;
}

std::size_t AttentionMask::row_count(std::size_t row) const {
  const auto begin = bits_.begin() + static_cast<std::ptrdiff_t>(row * cols_);
  return static_cast<std::size_t>(std::count(begin, begin + static_cast<std::ptrdiff_t>(cols_), 1));
}

void AttentionMask::check_self_attention(std::size_t first_slot) const {
  if (first_slot + rows_ > cols_) {
    throw DimensionError("mask has " + std::to_string(cols_) + " key slots but queries occupy [" +
                         std::to_string(first_slot) + ", " + std::to_string(first_slot + rows_) + ")");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    if (!allowed(i, first_slot + i)) {
      throw ValidationError("mask row " + std::to_string(i) + " does not attend to its own slot");
    }
  }
}

std::string AttentionMask::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t j = 0; j < cols_; ++j) out.push_back(allowed(i, j) ? '1' : '.');
    out.push_back('\n');
  }
  return out;
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
