#pragma once

#include <cstdint>
#include <vector>

#include "scdd/error.hpp"
#include "scdd/random.hpp"

namespace scdd {

/// Walker/Vose alias table: O(n) construction, O(1) draws from a fixed
/// discrete distribution. Zero weights are never drawn.
class AliasTable {
 public:
  AliasTable() = default;

  explicit AliasTable(const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw Error(ErrorKind::validation, "negative alias weight");
      total += w;
    }
    if (n == 0 || !(total > 0.0)) throw Error(ErrorKind::empty_input, "alias table needs positive total weight");

    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = weights[i] * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers are 1 up to rounding. A zero-weight leftover keeps prob 0 and
    // must alias to something drawable.
    for (std::size_t l : large) prob_[l] = 1.0;
    for (std::size_t s : small) prob_[s] = weights[s] > 0.0 ? 1.0 : 0.0;
    std::size_t any_positive = 0;
    while (weights[any_positive] <= 0.0) ++any_positive;
    for (std::size_t i = 0; i < n; ++i) {
      if (prob_[i] < 1.0 && weights[alias_[i]] <= 0.0) alias_[i] = any_positive;
    }
  }

  std::size_t size() const { return prob_.size(); }
  bool empty() const { return prob_.empty(); }

  std::size_t sample(Rng& rng) const {
    const std::size_t column = uniform_below(rng, prob_.size());
    return uniform01(rng) < prob_[column] ? column : alias_[column];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

}  // namespace scdd
