#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dime/error.hpp"
#include "dime/program.hpp"
#include "dime/region.hpp"

namespace dime {

enum class Version : std::uint8_t { base = 0, instrument = 1 };

inline std::string_view version_name(Version v) { return v == Version::base ? "V_BASE" : "V_INSTRUMENT"; }

enum class Granularity { ctrl, all };

inline Granularity parse_granularity(std::string_view s) {
  if (s == "ctrl") return Granularity::ctrl;
  if (s == "all") return Granularity::all;
  throw ConfigError("unknown granularity '" + std::string(s) + "'");
}

inline std::string_view granularity_name(Granularity g) { return g == Granularity::ctrl ? "ctrl" : "all"; }

// A compiled straight-line region: single entry, possibly several exits.
// Only the last instruction may be an unconditional transfer; conditional
// branches anywhere are exits.
struct TraceDescriptor {
  std::string image;
  Address rel_start = 0;
  Address start = 0;  // absolute
  std::size_t length = 0;
  Version version = Version::base;
  // Offsets that carry a budget check (and, when instrumented, an analysis call).
  std::vector<std::size_t> points;
  // Set when the trace is V_INSTRUMENT and the redundancy log allowed analysis.
  bool instrumented = false;

  Address end() const { return start + length; }
  Region region() const { return {image, rel_start, length}; }

  bool is_point(std::size_t offset) const {
    auto it = std::lower_bound(points.begin(), points.end(), offset);
    return it != points.end() && *it == offset;
  }

  friend bool operator==(const TraceDescriptor&, const TraceDescriptor&) = default;
};

// Cached traces keyed by (absolute start, version).
class TraceCache {
 public:
  using key_type = std::pair<Address, Version>;

  const TraceDescriptor* find(Address start, Version v) const {
    auto it = traces_.find({start, v});
    return it == traces_.end() ? nullptr : &it->second;
  }

  TraceDescriptor* find(Address start, Version v) {
    auto it = traces_.find({start, v});
    return it == traces_.end() ? nullptr : &it->second;
  }

  bool has_entry(Address start, Version v) const { return traces_.count({start, v}) != 0; }

  // Inserts a freshly formed trace. A cached trace of the same version that
  // contains the new entry point is split there, so traces of one version
  // never overlap.
  TraceDescriptor& insert(TraceDescriptor trace) {
    for (auto& [key, cached] : traces_) {
      if (key.second != trace.version) continue;
      if (cached.start < trace.start && trace.start < cached.end()) {
        cached.length = trace.start - cached.start;
        std::erase_if(cached.points, [&](std::size_t off) { return off >= cached.length; });
      }
    }
    auto key = key_type{trace.start, trace.version};
    auto [it, inserted] = traces_.insert_or_assign(key, std::move(trace));
    return it->second;
  }

  std::size_t size() const { return traces_.size(); }
  const std::map<key_type, TraceDescriptor>& traces() const { return traces_; }

 private:
  std::map<key_type, TraceDescriptor> traces_;
};

inline std::vector<std::size_t> instrumentation_points(const Program& program, Address start, std::size_t length,
                                                       Granularity g) {
  std::vector<std::size_t> points;
  for (std::size_t off = 0; off < length; ++off) {
    if (g == Granularity::all || is_control_transfer(program.at(start + off).op)) points.push_back(off);
  }
  return points;
}

// Forms the trace beginning at `entry`: it runs until (inclusive) the first
// jmp/call/ret/halt, for at most `max_len` instructions, and stops before
// the entry point of any cached trace of the same version. It never crosses
// the end of its image.
inline TraceDescriptor form_trace(const Program& program, Address entry, Version version, std::size_t max_len,
                                  Granularity granularity = Granularity::ctrl, const TraceCache* cache = nullptr) {
  if (max_len == 0) throw ConfigError("max_len must be at least 1");
  Resolved r = program.resolve(entry);
  const ProgramImage& img = *r.image;

  std::size_t length = 0;
  for (Address a = entry; a < img.end() && length < max_len; ++a) {
    if (length > 0 && cache != nullptr && cache->has_entry(a, version)) break;
    ++length;
    if (is_unconditional_transfer(img.instructions[a - img.base].op)) break;
  }

  TraceDescriptor t;
  t.image = img.name;
  t.rel_start = r.relative;
  t.start = entry;
  t.length = length;
  t.version = version;
  t.points = instrumentation_points(program, entry, length, granularity);
  return t;
}

}  // namespace dime
