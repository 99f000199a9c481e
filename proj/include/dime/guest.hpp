#pragma once

#include <cstdint>
#include <random>
#include <unordered_map>
#include <vector>

#include "dime/error.hpp"
#include "dime/program.hpp"

namespace dime {

// Result of executing one guest instruction.
struct Transfer {
  Address next = 0;
  // Control moved somewhere other than the next sequential address.
  bool taken = false;
  bool halted = false;
};

// Architectural state of the guest: program counter aside, the call stack,
// per-branch pattern cursors, and the seeded source of ndbr outcomes.
class GuestState {
 public:
  explicit GuestState(std::uint64_t seed) : rng_(seed) {}

  // Decides the outcome of `ins`. Draws from the RNG exactly once per ndbr
  // execution, so outcomes do not depend on instrumentation.
  Transfer step(const Instruction& ins) {
    switch (ins.op) {
      case Opcode::compute:
        return {ins.addr + 1, false, false};
      case Opcode::jmp:
        return {ins.target, true, false};
      case Opcode::br: {
        auto& cursor = cursors_[ins.addr];
        bool taken = ins.pattern[cursor % ins.pattern.size()] == 'T';
        ++cursor;
        return taken ? Transfer{ins.target, true, false} : Transfer{ins.addr + 1, false, false};
      }
      case Opcode::ndbr: {
        bool taken = uniform() < ins.probability;
        return taken ? Transfer{ins.target, true, false} : Transfer{ins.addr + 1, false, false};
      }
      case Opcode::call:
        stack_.push_back(ins.addr + 1);
        return {ins.target, true, false};
      case Opcode::ret: {
        if (stack_.empty()) throw GuestError("ret with empty call stack at " + std::to_string(ins.addr));
        Address back = stack_.back();
        stack_.pop_back();
        return {back, true, false};
      }
      case Opcode::halt:
        return {ins.addr, false, true};
    }
    return {ins.addr + 1, false, false};
  }

  std::size_t call_depth() const { return stack_.size(); }

 private:
  // 53 random bits in [0, 1); identical on every platform, unlike
  // std::uniform_real_distribution.
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  std::vector<Address> stack_;
  std::unordered_map<Address, std::size_t> cursors_;
};

}  // namespace dime
