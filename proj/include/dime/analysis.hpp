#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dime/error.hpp"
#include "dime/guest.hpp"
#include "dime/program.hpp"

namespace dime {

enum class BranchKind : std::uint8_t { jump, call, ret };

inline std::string_view branch_kind_name(BranchKind k) {
  switch (k) {
    case BranchKind::jump: return "jump";
    case BranchKind::call: return "call";
    case BranchKind::ret: return "return";
  }
  return "?";
}

struct BranchRecord {
  BranchKind kind = BranchKind::jump;
  Address src = 0;
  Address dst = 0;

  friend bool operator==(const BranchRecord&, const BranchRecord&) = default;
  friend auto operator<=>(const BranchRecord&, const BranchRecord&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const BranchRecord& r) {
  return os << branch_kind_name(r.kind) << ',' << r.src << ',' << r.dst;
}

// An analysis routine. The executor invokes it once per executed analysis
// call, after the guest outcome of the instruction is known.
class AnalysisTool {
 public:
  virtual ~AnalysisTool() = default;
  virtual std::string_view name() const = 0;
  virtual void on_analysis(const Instruction& ins, const Transfer& outcome) = 0;
  virtual const std::vector<BranchRecord>& records() const = 0;
  virtual void reset() = 0;
};

// Branch profiler: records every taken jump, call and return with its source
// and destination. Conditional fall-through has no distinct destination and
// emits nothing.
class BranchProfiler : public AnalysisTool {
 public:
  std::string_view name() const override { return "branch"; }

  void on_analysis(const Instruction& ins, const Transfer& outcome) override {
    if (!outcome.taken) return;
    switch (ins.op) {
      case Opcode::jmp:
      case Opcode::br:
      case Opcode::ndbr: on_branch(BranchKind::jump, ins.addr, outcome.next); break;
      case Opcode::call: on_branch(BranchKind::call, ins.addr, outcome.next); break;
      case Opcode::ret: on_branch(BranchKind::ret, ins.addr, outcome.next); break;
      default: break;
    }
  }

  virtual void on_branch(BranchKind kind, Address src, Address dst) { records_.push_back({kind, src, dst}); }

  const std::vector<BranchRecord>& records() const override { return records_; }
  void reset() override { records_.clear(); }

 protected:
  std::vector<BranchRecord> records_;
};

// Call tracer feeding call-context-tree construction: keeps calls and
// returns only.
class CallTracer : public BranchProfiler {
 public:
  std::string_view name() const override { return "cct"; }

  void on_branch(BranchKind kind, Address src, Address dst) override {
    if (kind != BranchKind::jump) records_.push_back({kind, src, dst});
  }
};

inline std::unique_ptr<AnalysisTool> make_tool(std::string_view name) {
  if (name == "branch") return std::make_unique<BranchProfiler>();
  if (name == "cct") return std::make_unique<CallTracer>();
  throw ConfigError("unknown tool '" + std::string(name) + "'");
}

// Calling-context tree. Node 0 is the synthetic root; the routine that runs
// at program start becomes its child when the first record arrives.
class CallContextTree {
 public:
  struct Node {
    Address routine = 0;
    std::size_t parent = 0;
    std::map<Address, std::size_t> children;
  };

  CallContextTree() { nodes_.push_back({}); }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return nodes_.size() - 1; }
  const std::vector<Node>& nodes() const { return nodes_; }

  // Child of `parent` for `routine`, created if absent.
  std::size_t child(std::size_t parent, Address routine) {
    auto& kids = nodes_[parent].children;
    if (auto it = kids.find(routine); it != kids.end()) return it->second;
    nodes_.push_back({routine, parent, {}});
    std::size_t id = nodes_.size() - 1;
    nodes_[parent].children.emplace(routine, id);
    return id;
  }

  // Indented dump, one routine per line, followed by a "nodes=N edges=E"
  // trailer.
  std::string dump() const {
    std::ostringstream out;
    out << "root\n";
    dump_children(out, 0, 1);
    out << "nodes=" << node_count() << " edges=" << edge_count() << '\n';
    return out.str();
  }

 private:
  void dump_children(std::ostringstream& out, std::size_t id, std::size_t depth) const {
    for (const auto& [routine, child] : nodes_[id].children) {
      out << std::string(2 * depth, ' ') << routine << '\n';
      dump_children(out, child, depth + 1);
    }
  }

  std::vector<Node> nodes_;
};

// Builds the calling-context tree from an ordered call/return stream. Calls
// descend (creating the child context on first sight), returns ascend. A
// return at the root is ignored; budget truncation can orphan returns.
// Jump records are skipped.
inline CallContextTree build_cct(std::span<const BranchRecord> records, Address entry_routine = 0) {
  CallContextTree tree;
  std::size_t cursor = 0;
  bool started = false;
  for (const auto& r : records) {
    if (r.kind == BranchKind::jump) continue;
    if (!started) {
      started = true;
      cursor = tree.child(0, entry_routine);
    }
    if (r.kind == BranchKind::call) {
      cursor = tree.child(cursor, r.dst);
    } else if (cursor != 0) {
      cursor = tree.nodes()[cursor].parent;
    }
  }
  return tree;
}

inline std::string format_records(std::span<const BranchRecord> records) {
  std::ostringstream out;
  for (const auto& r : records) out << r << '\n';
  return out.str();
}

}  // namespace dime
