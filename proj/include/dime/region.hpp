#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <string>

#include "dime/interval_set.hpp"
#include "dime/program.hpp"

namespace dime {

// A contiguous code region named by image and image-relative start address.
// Relative addresses stay stable across runs even if an image moves.
struct Region {
  std::string image;
  Address start = 0;
  std::uint64_t length = 0;

  Address end() const { return start + length; }

  friend bool operator==(const Region&, const Region&) = default;
  friend auto operator<=>(const Region&, const Region&) = default;
};

// Union of regions, kept per image as disjoint intervals.
class RegionSet {
 public:
  void insert(const Region& r) {
    if (r.length > 0) images_[r.image].insert(r.start, r.end());
  }

  bool contains(const std::string& image, Address rel) const {
    auto it = images_.find(image);
    return it != images_.end() && it->second.contains(rel);
  }

  bool intersects(const Region& r) const {
    auto it = images_.find(r.image);
    return it != images_.end() && it->second.intersects(r.start, r.end());
  }

  bool covers(const Region& r) const {
    if (r.length == 0) return true;
    auto it = images_.find(r.image);
    return it != images_.end() && it->second.covers(r.start, r.end());
  }

  std::uint64_t measure() const {
    std::uint64_t n = 0;
    for (const auto& [_, set] : images_) n += set.measure();
    return n;
  }

  const std::map<std::string, IntervalSet<Address>>& images() const { return images_; }

  friend bool operator==(const RegionSet&, const RegionSet&) = default;

 private:
  std::map<std::string, IntervalSet<Address>> images_;
};

}  // namespace dime
