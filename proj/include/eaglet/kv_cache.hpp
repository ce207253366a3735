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
#include <span>
#include <vector>

#include "eaglet/real.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

// Per-layer keys and values stored by absolute slot, plus the sequence
// position of each occupied slot. Capacity is fixed at construction.
class KVCache {
 public:
  KVCache() = default;
  KVCache(std::size_t layers, std::size_t hidden, std::size_t capacity);

  std::size_t layers() const { return keys_.size(); }
  std::size_t hidden() const { return hidden_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t occupancy() const { return positions_.size(); }
  const std::vector<std::int64_t>& positions() const { return positions_; }

  // Claims slots for `positions`; returns the first new slot. Throws
  // CapacityError when the cache would overflow.
  std::size_t reserve(std::span<const std::int64_t> positions);

  real* keys(std::size_t layer, std::size_t slot) { return keys_[layer].data() + slot * hidden_; }
  real* values(std::size_t layer, std::size_t slot) { return values_[layer].data() + slot * hidden_; }
  const real* keys(std::size_t layer, std::size_t slot) const {
    return keys_[layer].data() + slot * hidden_;
  }
  const real* values(std::size_t layer, std::size_t slot) const {
    return values_[layer].data() + slot * hidden_;
  }

  // Keeps only `keep_slots` (occupied, strictly increasing in position),
  // compacted to the front in the given order.
  void prune(std::span<const std::size_t> keep_slots);
  // Drops every slot at index >= count.
  void truncate(std::size_t count);
  void clear() { truncate(0); }

 private:
  std::size_t hidden_ = 0;
  std::size_t capacity_ = 0;
  std::vector<std::vector<real>> keys_;
  std::vector<std::vector<real>> values_;
  std::vector<std::int64_t> positions_;
};

}  // namespace EAGLET_ABI
}  // namespace eaglet
