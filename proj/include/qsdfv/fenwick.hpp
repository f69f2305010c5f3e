#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace qsdfv {

// Fenwick tree over integer weights, used as a dynamic discrete sampler:
// update, append and cumulative-search are all O(log n). Indices are 0-based.
class FenwickTree {
 public:
  FenwickTree() = default;
  explicit FenwickTree(std::size_t n) : tree_(n + 1, 0), weight_(n, 0) {
    rebuild_search_mask();
  }

  std::size_t size() const { return weight_.size(); }
  std::int64_t total() const { return total_; }
  std::int64_t weight(std::size_t i) const { return weight_[i]; }

  void add(std::size_t i, std::int64_t delta) {
    weight_[i] += delta;
    total_ += delta;
    for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1))
      tree_[k] += delta;
  }

  void set(std::size_t i, std::int64_t w) { add(i, w - weight_[i]); }

  void push_back(std::int64_t w) {
    weight_.push_back(0);
    std::size_t k = weight_.size();  // 1-based index of the new element
    std::size_t lowbit = k & (~k + 1);
    // tree_[k] covers (k - lowbit, k]; the new element itself is zero so far
    tree_.push_back(prefix(k - 1) - prefix(k - lowbit));
    rebuild_search_mask();
    add(weight_.size() - 1, w);
  }

  // Smallest 0-based i with weight_[0] + ... + weight_[i] > r, r in [0, total).
  std::size_t find(std::int64_t r) const {
    assert(r >= 0 && r < total_);
    std::size_t idx = 0;
    for (std::size_t mask = search_mask_; mask != 0; mask >>= 1) {
      std::size_t next = idx + mask;
      if (next < tree_.size() && tree_[next] <= r) {
        idx = next;
        r -= tree_[next];
      }
    }
    return idx;
  }

 private:
  // sum of the first i elements (i is a 1-based count)
  std::int64_t prefix(std::size_t i) const {
    std::int64_t s = 0;
    for (std::size_t k = i; k > 0; k -= k & (~k + 1)) s += tree_[k];
    return s;
  }

  void rebuild_search_mask() {
    search_mask_ = 1;
    while ((search_mask_ << 1) < tree_.size()) search_mask_ <<= 1;
  }

  std::vector<std::int64_t> tree_{0};  // 1-based implicit tree
  std::vector<std::int64_t> weight_;
  std::int64_t total_ = 0;
  std::size_t search_mask_ = 1;
};

}  // namespace qsdfv
