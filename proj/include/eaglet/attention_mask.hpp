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
#include <string>
#include <vector>

#include "eaglet/real.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

// Boolean [queries, key slots] matrix; entry (i, j) is true when query i may
// attend to key slot j.
class AttentionMask {
 public:
  AttentionMask() = default;
  AttentionMask(std::size_t rows, std::size_t cols);

  // Row i attends to slots [0, prefix + i].
  static AttentionMask causal(std::size_t rows, std::size_t prefix = 0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool allowed(std::size_t row, std::size_t col) const { return bits_[row * cols_ + col] != 0; }
  void set(std::size_t row, std::size_t col, bool value = true) {
    bits_[row * cols_ + col] = value ? 1 : 0;
  }
  std::size_t row_count(std::size_t row) const;
  const std::uint8_t* data() const { return bits_.data(); }

  // Throws unless every query i attends to its own slot first_slot + i.
  void check_self_attention(std::size_t first_slot) const;

  bool operator==(const AttentionMask&) const = default;
  std::string to_string() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace EAGLET_ABI
}  // namespace eaglet
