#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace dppfit {

/// A subset of the ground set {1..N}: strictly increasing 1-based indices,
/// possibly empty. The ground size N is not stored; operations that pair an
/// IndexSet with a matrix check the bound there.
class IndexSet {
 public:
  IndexSet() = default;

  explicit IndexSet(std::vector<int> items) : items_(std::move(items)) {
    std::sort(items_.begin(), items_.end());
    if (!items_.empty() && items_.front() < 1) {
      throw std::invalid_argument("IndexSet entries are 1-based");
    }
    if (std::adjacent_find(items_.begin(), items_.end()) != items_.end()) {
      throw std::invalid_argument("IndexSet entries must be distinct");
    }
  }

  IndexSet(std::initializer_list<int> items)
      : IndexSet(std::vector<int>(items)) {}

  /// The full set {1..n}.
  static IndexSet full(int n) {
    std::vector<int> items(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) items[static_cast<std::size_t>(i)] = i + 1;
    return IndexSet(std::move(items));
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<int>& items() const { return items_; }
  int max_index() const { return items_.empty() ? 0 : items_.back(); }
  bool valid_for(long dim) const { return max_index() <= dim; }

  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  friend bool operator==(const IndexSet& a, const IndexSet& b) {
    return a.items_ == b.items_;
  }
  friend bool operator<(const IndexSet& a, const IndexSet& b) {
    return a.items_ < b.items_;
  }

 private:
  std::vector<int> items_;
};

}  // namespace dppfit
