#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "dime/error.hpp"
#include "dime/program.hpp"

namespace dime {

struct Overshoot {
  Time time = 0;
  Time magnitude = 0;
  std::uint64_t period = 0;

  friend bool operator==(const Overshoot&, const Overshoot&) = default;
};

// Instrumentation time charged within one period.
struct PeriodUsage {
  std::uint64_t period = 0;
  Time instrumentation = 0;
  Time largest_charge = 0;

  friend bool operator==(const PeriodUsage&, const PeriodUsage&) = default;
};

// Rate-based budget server: instrumentation may consume `budget` time units
// out of every `period`. The budget is reset (not accumulated) at every
// period boundary k * period.
class BudgetServer {
 public:
  static constexpr Time kUnlimited = std::numeric_limits<Time>::max() / 4;

  BudgetServer(Time period, Time budget) : period_(period), budget_(budget), remaining_(budget) {
    if (period <= 0) throw ConfigError("period must be positive");
    if (budget < 0 || budget > period) throw ConfigError("budget must satisfy 0 <= B <= T");
  }

  // A server whose budget never runs out.
  static BudgetServer unlimited() { return BudgetServer(kUnlimited, kUnlimited); }

  bool is_unlimited() const { return period_ == kUnlimited; }

  // Returns true iff budget remains at `now`, after applying every period
  // reset that is due.
  bool check(Time now) {
    observe(now);
    advance_to(now);
    last_check_ = remaining_ > 0;
    return last_check_;
  }

  // Charges an analysis call that started at `now`. The call is atomic, so
  // the budget may be overdrawn; the excess is recorded as an overshoot and
  // the remaining budget clamps to zero.
  void charge(Time cost, Time now) {
    if (cost < 0) throw ContractViolation("negative charge");
    if (!last_check_) throw ContractViolation("charge without a passing budget check");
    observe(now);
    remaining_ -= cost;
    t_ins_ += cost;
    auto& usage = current_usage();
    usage.instrumentation += cost;
    usage.largest_charge = std::max(usage.largest_charge, cost);
    if (remaining_ < 0) {
      overshoots_.push_back({now, -remaining_, period_index_});
      remaining_ = 0;
    }
    // every analysis call needs its own passing check
    last_check_ = false;
  }

  Time period() const { return period_; }
  Time budget() const { return budget_; }
  Time remaining() const { return remaining_; }
  std::uint64_t period_index() const { return period_index_; }
  Time instrumentation_this_period() const { return t_ins_; }
  const std::vector<Overshoot>& overshoots() const { return overshoots_; }
  // Periods in which anything was charged, in order.
  const std::vector<PeriodUsage>& usage() const { return usage_; }

 private:
  void observe(Time now) {
    if (now < 0) throw ContractViolation("negative time");
    if (now < last_now_) throw ContractViolation("virtual clock moved backwards");
    last_now_ = now;
  }

  void advance_to(Time now) {
    auto target = static_cast<std::uint64_t>(now / period_);
    if (target > period_index_) {
      period_index_ = target;
      remaining_ = budget_;
      t_ins_ = 0;
    }
  }

  PeriodUsage& current_usage() {
    if (usage_.empty() || usage_.back().period != period_index_) usage_.push_back({period_index_, 0, 0});
    return usage_.back();
  }

  Time period_;
  Time budget_;
  Time remaining_;
  std::uint64_t period_index_ = 0;
  Time t_ins_ = 0;
  Time last_now_ = 0;
  bool last_check_ = false;
  std::vector<Overshoot> overshoots_;
  std::vector<PeriodUsage> usage_;
};

}  // namespace dime
