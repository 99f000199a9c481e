#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "dime/error.hpp"
#include "dime/interval_set.hpp"
#include "dime/region.hpp"

namespace dime {

enum class LogStrategy { none, hash, bst, merger };

inline std::string_view strategy_name(LogStrategy s) {
  switch (s) {
    case LogStrategy::none: return "none";
    case LogStrategy::hash: return "hash";
    case LogStrategy::bst: return "bst";
    case LogStrategy::merger: return "merger";
  }
  return "?";
}

inline LogStrategy parse_strategy(std::string_view s) {
  if (s == "none") return LogStrategy::none;
  if (s == "hash") return LogStrategy::hash;
  if (s == "bst") return LogStrategy::bst;
  if (s == "merger") return LogStrategy::merger;
  throw ConfigError("unknown log strategy '" + std::string(s) + "'");
}

// A persisted log record. The hash strategy keeps start addresses only.
struct LogEntry {
  std::string image;
  Address rel_addr = 0;
  std::optional<std::uint64_t> length;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

// Native mode: every trace is instrumented, nothing is remembered.
class NullLog {
 public:
  static constexpr LogStrategy strategy = LogStrategy::none;
  bool permit(const Region&) const { return true; }
  void commit(const Region&) {}
  void finalize() {}
  std::vector<LogEntry> entries() const { return {}; }
};

// Remembers trace start addresses only. A candidate is instrumented iff its
// start address was never committed; lengths are ignored.
class HashLog {
 public:
  static constexpr LogStrategy strategy = LogStrategy::hash;

  bool permit(const Region& candidate) const {
    auto it = keys_.find(candidate.image);
    return it == keys_.end() || !it->second.contains(candidate.start);
  }

  void commit(const Region& entry) { keys_[entry.image].insert(entry.start); }
  void finalize() {}

  std::vector<LogEntry> entries() const {
    std::vector<LogEntry> out;
    for (const auto& [image, keys] : keys_)
      for (auto k : keys) out.push_back({image, k, std::nullopt});
    std::sort(out.begin(), out.end(), [](const LogEntry& a, const LogEntry& b) {
      return std::tie(a.image, a.rel_addr) < std::tie(b.image, b.rel_addr);
    });
    return out;
  }

 private:
  std::unordered_map<std::string, std::unordered_set<Address>> keys_;
};

// Ordered log of <start, length> entries. A candidate is rejected iff its
// start lies inside some logged entry. Entries may overlap, so the lookup
// runs against the union of all entries: the greatest merged interval
// starting at or before the candidate decides.
class BstLog {
 public:
  static constexpr LogStrategy strategy = LogStrategy::bst;

  bool permit(const Region& candidate) const {
    auto it = images_.find(candidate.image);
    return it == images_.end() || !it->second.coverage.contains(candidate.start);
  }

  // Duplicate start addresses keep the longer length.
  void commit(const Region& entry) {
    auto& img = images_[entry.image];
    auto [it, inserted] = img.entries.emplace(entry.start, entry.length);
    if (!inserted) it->second = std::max(it->second, entry.length);
    img.coverage.insert(entry.start, entry.end());
  }

  // Merges directly consecutive entries: <a, l1> and <a + l1, l2> become
  // <a, l1 + l2>.
  void finalize() {
    for (auto& [_, img] : images_) {
      auto it = img.entries.begin();
      while (it != img.entries.end()) {
        auto next = std::next(it);
        if (next != img.entries.end() && it->first + it->second == next->first) {
          it->second += next->second;
          img.entries.erase(next);
        } else {
          it = next;
        }
      }
    }
  }

  std::vector<LogEntry> entries() const {
    std::vector<LogEntry> out;
    for (const auto& [image, img] : images_)
      for (const auto& [start, len] : img.entries) out.push_back({image, start, len});
    return out;
  }

 private:
  struct Image {
    std::map<Address, std::uint64_t> entries;
    IntervalSet<Address> coverage;
  };
  std::map<std::string, Image> images_;
};

// Ordered log kept as disjoint intervals. A candidate is rejected only when
// it lies strictly inside a logged entry: start(B) <= start(A) and
// end(A) < end(B). Commits merge with overlapping and adjacent entries.
class MergerLog {
 public:
  static constexpr LogStrategy strategy = LogStrategy::merger;

  bool permit(const Region& candidate) const {
    auto it = images_.find(candidate.image);
    if (it == images_.end()) return true;
    auto b = it->second.find(candidate.start);
    return !(b && candidate.end() < b->second);
  }

  void commit(const Region& entry) { images_[entry.image].insert(entry.start, entry.end()); }
  void finalize() {}

  std::vector<LogEntry> entries() const {
    std::vector<LogEntry> out;
    for (const auto& [image, set] : images_)
      for (const auto& [lo, hi] : set) out.push_back({image, lo, hi - lo});
    return out;
  }

 private:
  std::map<std::string, IntervalSet<Address>> images_;
};

// Redundancy log with a strategy chosen at run time.
class RedundancyLog {
 public:
  explicit RedundancyLog(LogStrategy strategy = LogStrategy::none) {
    switch (strategy) {
      case LogStrategy::none: impl_ = NullLog{}; break;
      case LogStrategy::hash: impl_ = HashLog{}; break;
      case LogStrategy::bst: impl_ = BstLog{}; break;
      case LogStrategy::merger: impl_ = MergerLog{}; break;
    }
  }

  LogStrategy strategy() const {
    return std::visit([](const auto& l) { return std::decay_t<decltype(l)>::strategy; }, impl_);
  }

  // Whether a trace covering `candidate` may be instrumented.
  bool permit(const Region& candidate) const {
    return std::visit([&](const auto& l) { return l.permit(candidate); }, impl_);
  }

  void commit(const Region& entry) {
    if (entry.length == 0) throw ContractViolation("log entry with zero length");
    std::visit([&](auto& l) { l.commit(entry); }, impl_);
  }

  void finalize() {
    std::visit([](auto& l) { l.finalize(); }, impl_);
  }

  // Entries sorted by (image, rel_addr).
  std::vector<LogEntry> entries() const {
    return std::visit([](const auto& l) { return l.entries(); }, impl_);
  }

  std::size_t size() const { return entries().size(); }

 private:
  std::variant<NullLog, HashLog, BstLog, MergerLog> impl_;
};

inline constexpr std::string_view kLogHeader = "# dime-log v1 strategy=";

// Finalizes the log and renders it in the persisted format.
inline std::string serialize_log(RedundancyLog& log) {
  if (log.strategy() == LogStrategy::none) throw ConfigError("strategy 'none' has no log file");
  log.finalize();
  std::string out;
  out += kLogHeader;
  out += strategy_name(log.strategy());
  out += '\n';
  for (const auto& e : log.entries()) {
    out += e.image;
    out += ',';
    out += std::to_string(e.rel_addr);
    if (e.length) {
      out += ',';
      out += std::to_string(*e.length);
    }
    out += '\n';
  }
  return out;
}

// Parses a persisted log. When `expected` is given, a file written under a
// different strategy is rejected.
inline RedundancyLog parse_log(std::string_view text, std::optional<LogStrategy> expected = std::nullopt) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      line = text.substr(pos);
      pos = text.size();
    } else {
      line = text.substr(pos, nl - pos);
      pos = nl + 1;
    }
    ++line_no;
    return true;
  };
  auto fail = [&](const std::string& what) -> LogFormatError {
    return LogFormatError("log line " + std::to_string(line_no) + ": " + what);
  };

  std::string_view line;
  if (!next_line(line) || line.substr(0, kLogHeader.size()) != kLogHeader) throw fail("missing log header");
  auto name = line.substr(kLogHeader.size());
  LogStrategy strategy;
  try {
    strategy = parse_strategy(name);
  } catch (const ConfigError&) {
    throw fail("unknown strategy '" + std::string(name) + "'");
  }
  if (strategy == LogStrategy::none) throw fail("strategy 'none' has no log file");
  if (expected && *expected != strategy)
    throw LogFormatError("log file was written with strategy '" + std::string(strategy_name(strategy)) +
                         "', expected '" + std::string(strategy_name(*expected)) + "'");

  RedundancyLog log(strategy);
  const std::size_t fields = strategy == LogStrategy::hash ? 2 : 3;
  while (next_line(line)) {
    if (line.empty()) throw fail("empty line");
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
      auto comma = line.find(',', start);
      parts.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (parts.size() != fields)
      throw fail("expected " + std::to_string(fields) + " fields for strategy '" +
                 std::string(strategy_name(strategy)) + "'");
    if (!detail::is_identifier(parts[0])) throw fail("bad image name");
    auto rel = detail::parse_uint<Address>(parts[1]);
    if (!rel) throw fail("bad address");
    std::uint64_t length = 1;
    if (fields == 3) {
      auto len = detail::parse_uint<std::uint64_t>(parts[2]);
      if (!len || *len == 0) throw fail("bad length");
      length = *len;
    }
    log.commit({std::string(parts[0]), *rel, length});
  }
  return log;
}

inline void save_log(RedundancyLog& log, const std::filesystem::path& path) {
  std::string text = serialize_log(log);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write log file " + path.string());
  out << text;
  if (!out.flush()) throw Error("cannot write log file " + path.string());
}

// Loads a log file. A missing file yields an empty log unless `resume` is set,
// in which case a previous run is required.
inline RedundancyLog load_log(const std::filesystem::path& path, LogStrategy strategy, bool resume = false) {
  if (strategy == LogStrategy::none) return RedundancyLog(strategy);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (resume) throw ConfigError("log file " + path.string() + " does not exist");
    return RedundancyLog(strategy);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_log(buf.str(), strategy);
}

}  // namespace dime
