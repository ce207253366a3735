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

#include "eaglet/kv_cache.hpp"

#include <algorithm>
#include <string>

#include "eaglet/errors.hpp"

namespace eaglet {
inline namespace EAGLET_ABI {

KVCache::KVCache(std::size_t layers, std::size_t hidden, std::size_t capacity)
    : hidden_(hidden),
      capacity_(capacity),
      keys_(layers, std::vector<real>(hidden * capacity, 0.0f)),
      values_(layers, std::vector<real>(hidden * capacity, 0.0f)) {
  positions_.reserve(capacity);
}

std::size_t KVCache::reserve(std::span<const std::int64_t> positions) {
  if (occupancy() + positions.size() > capacity_) {
    throw CapacityError("kv cache overflow: " + std::to_string(occupancy()) + " + " +
                        std::to_string(positions.size()) + " slots exceeds capacity " +
                        std::to_string(capacity_));
  }
  const std::size_t first = occupancy();
  positions_.insert(positions_.end(), positions.begin(), positions.end());
  return first;
}

void KVCache::prune(std::span<const std::size_t> keep_slots) {
  for (std::size_t i = 0; i < keep_slots.size(); ++i) {
    if (keep_slots[i] >= occupancy()) {
      throw UsageError("prune: slot " + std::to_string(keep_slots[i]) + " is not occupied (occupancy " +
                       std::to_string(occupancy()) + ")");
    }
    if (i > 0 && (keep_slots[i] <= keep_slots[i - 1] ||
                  positions_[keep_slots[i]] <= positions_[keep_slots[i - 1]])) {
      throw UsageError("prune: kept slots must be strictly increasing in slot and position");
    }
  }
  // Slots only move toward the front, so an in-order copy never clobbers a
  // slot that is still to be read.
  std::vector<std::int64_t> kept_positions;
  kept_positions.reserve(keep_slots.size());
  for (std::size_t dst = 0; dst < keep_slots.size(); ++dst) {
    const std::size_t src = keep_slots[dst];
    kept_positions.push_back(positions_[src]);
    if (src == dst) continue;
    for (std::size_t layer = 0; layer < layers(); ++layer) {
      std::copy_n(keys(layer, src), hidden_, keys(layer, dst));
      std::copy_n(values(layer, src), hidden_, values(layer, dst));
    }
  }
  positions_ = std::move(kept_positions);
}

void KVCache::truncate(std::size_t count) {
  if (count < positions_.size()) positions_.resize(count);
}

}  // namespace EAGLET_ABI
}  // namespace eaglet
