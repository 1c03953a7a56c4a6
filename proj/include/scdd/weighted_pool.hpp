#pragma once

#include <cstdint>
#include <vector>

#include "scdd/error.hpp"
#include "scdd/random.hpp"

namespace scdd {

/// Integer weights over slots 0..n-1 with O(log n) point updates and
/// proportional draws (Fenwick tree). Slots whose weight reaches zero can no
/// longer be drawn.
class WeightedPool {
 public:
  WeightedPool() = default;

  explicit WeightedPool(const std::vector<std::uint32_t>& weights)
      : tree_(weights.size() + 1, 0), weights_(weights) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
      tree_[i + 1] += weights[i];
      total_ += weights[i];
      const std::size_t parent = (i + 1) + ((i + 1) & (~(i + 1) + 1));
      if (parent < tree_.size()) tree_[parent] += tree_[i + 1];
    }
    top_bit_ = 1;
    while (top_bit_ * 2 <= weights.size()) top_bit_ *= 2;
  }

  std::size_t size() const { return weights_.size(); }
  std::uint64_t total() const { return total_; }
  std::uint32_t weight(std::size_t slot) const { return weights_[slot]; }

  void decrement(std::size_t slot) {
    if (weights_[slot] == 0) throw Error(ErrorKind::internal, "decrement of an empty pool slot");
    --weights_[slot];
    --total_;
    for (std::size_t i = slot + 1; i < tree_.size(); i += i & (~i + 1)) --tree_[i];
  }

  /// Slot drawn with probability weight / total. total() must be > 0.
  std::size_t sample(Rng& rng) const {
    std::uint64_t target = uniform_below(rng, total_);  // find first prefix sum > target
    std::size_t pos = 0;
    for (std::size_t step = top_bit_; step > 0; step >>= 1) {
      const std::size_t next = pos + step;
      if (next < tree_.size() && tree_[next] <= target) {
        pos = next;
        target -= tree_[next];
      }
    }
    return pos;  // 0-based slot index
  }

 private:
  std::vector<std::uint64_t> tree_;  // 1-based
  std::vector<std::uint32_t> weights_;
  std::uint64_t total_ = 0;
  std::size_t top_bit_ = 1;
};

}  // namespace scdd
