#pragma once

#include <cassert>
#include <concepts>
#include <cstddef>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <utility>

namespace dime {

// Set of half-open intervals [lo, hi) over an unsigned key, kept disjoint.
// Inserting an interval merges it with every stored interval it overlaps or
// directly touches, so [0,3) + [3,5) is stored as [0,5).
template <std::unsigned_integral Key>
class IntervalSet {
 public:
  using interval = std::pair<Key, Key>;
  using map_type = std::map<Key, Key>;
  using const_iterator = typename map_type::const_iterator;

  // Inserts [lo, hi). Empty intervals are ignored.
  void insert(Key lo, Key hi) {
    if (lo >= hi) return;
    auto it = set_.upper_bound(lo);
    if (it != set_.begin()) {
      auto prev = std::prev(it);
      if (prev->second >= lo) {
        if (prev->second >= hi) return;
        lo = prev->first;
        it = prev;
      }
    }
    while (it != set_.end() && it->first <= hi) {
      if (it->second > hi) hi = it->second;
      it = set_.erase(it);
    }
    set_.emplace(lo, hi);
  }

  // Interval holding `point`, if any.
  std::optional<interval> find(Key point) const {
    auto it = set_.upper_bound(point);
    if (it == set_.begin()) return std::nullopt;
    --it;
    if (point < it->second) return interval{it->first, it->second};
    return std::nullopt;
  }

  bool contains(Key point) const { return find(point).has_value(); }

  // True iff every key of [lo, hi) is in the set.
  bool covers(Key lo, Key hi) const {
    if (lo >= hi) return true;
    auto iv = find(lo);
    return iv && hi <= iv->second;
  }

  // True iff some key of [lo, hi) is in the set.
  bool intersects(Key lo, Key hi) const {
    if (lo >= hi) return false;
    if (contains(lo)) return true;
    auto it = set_.upper_bound(lo);
    return it != set_.end() && it->first < hi;
  }

  // Number of keys covered.
  Key measure() const {
    Key n = 0;
    for (const auto& [lo, hi] : set_) n += hi - lo;
    return n;
  }

  std::size_t size() const { return set_.size(); }
  bool empty() const { return set_.empty(); }
  void clear() { set_.clear(); }

  const_iterator begin() const { return set_.begin(); }
  const_iterator end() const { return set_.end(); }

  friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

 private:
  map_type set_;
};

}  // namespace dime
