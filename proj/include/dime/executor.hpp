#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dime/analysis.hpp"
#include "dime/budget.hpp"
#include "dime/error.hpp"
#include "dime/guest.hpp"
#include "dime/program.hpp"
#include "dime/redundancy_log.hpp"
#include "dime/region.hpp"
#include "dime/trace.hpp"

namespace dime {

// Virtual-time prices of the instrumentation machinery. Guest instructions
// carry their own cost.
struct CostModel {
  Time analysis = 1;          // one analysis call
  Time budget_check = 0;      // one budget check
  Time instrumentation = 0;   // forming one trace (instrumentation routine)
};

struct ExecutorConfig {
  Granularity granularity = Granularity::ctrl;
  CostModel costs;
  std::size_t max_len = 16;
  std::uint64_t max_steps = 1'000'000;
  bool record_path = false;
  bool record_events = false;
};

// One consultation of the redundancy log while forming a V_INSTRUMENT trace.
struct PermitDecision {
  Region candidate;
  bool permitted = false;
  // Number of commits made earlier in the same run.
  std::size_t commits_before = 0;
};

enum class EventKind : std::uint8_t { compile, check, analysis, version_switch, commit };

struct ExecEvent {
  EventKind kind;
  Time time = 0;
  Address addr = 0;
  Version version = Version::base;
  // check: the check result; compile: whether analysis was attached
  bool flag = false;
  Region region;  // compile and commit only
};

struct ExecutionOutcome {
  Time virtual_time = 0;
  std::uint64_t steps = 0;
  // Union of the committed entries.
  RegionSet analyzed;
  std::vector<BranchRecord> tool_output;
  std::vector<Region> committed;
  std::vector<Overshoot> overshoots;
  std::vector<PeriodUsage> budget_usage;
  std::vector<PermitDecision> decisions;
  std::uint64_t analysis_calls = 0;
  std::uint64_t budget_checks = 0;
  std::uint64_t compilations = 0;
  std::uint64_t version_switches = 0;
  // Executed guest addresses, when ExecutorConfig::record_path is set.
  std::vector<Address> path;
  std::vector<ExecEvent> events;
};

// Runs a program trace by trace under a virtual clock with two trace
// versions. Every instrumentation point starts with a budget check; when
// its result disagrees with the running trace's version, the trace is
// abandoned and execution continues in a trace of the other version that
// starts at the same instruction.
class Executor {
 public:
  Executor(const Program& program, ExecutorConfig config) : program_(program), config_(config) {
    if (config_.max_len == 0) throw ConfigError("max_len must be at least 1");
    if (config_.max_steps == 0) throw ConfigError("max_steps must be at least 1");
    if (config_.costs.budget_check < 0 || config_.costs.instrumentation < 0)
      throw ConfigError("costs must be non-negative");
  }

  ExecutionOutcome run(RedundancyLog& log, BudgetServer& budget, AnalysisTool& tool, std::uint64_t seed) {
    if (config_.costs.analysis <= 0) throw ConfigError("analysis cost must be positive when a tool is attached");
    Run r{*this, log, budget, tool, seed};
    return r.execute();
  }

  // Plain execution with no instrumentation machinery at all.
  ExecutionOutcome run_native(std::uint64_t seed) const {
    ExecutionOutcome out;
    GuestState guest(seed);
    Address pc = program_.entry();
    while (true) {
      const Instruction& ins = fetch(pc);
      Transfer tr = guest.step(ins);
      out.virtual_time += ins.cost;
      if (++out.steps > config_.max_steps) throw GuestError("step limit exceeded");
      if (config_.record_path) out.path.push_back(pc);
      if (tr.halted) break;
      pc = tr.next;
    }
    return out;
  }

  const TraceCache& cache() const { return cache_; }
  const ExecutorConfig& config() const { return config_; }

 private:
  const Instruction& fetch(Address pc) const {
    const ProgramImage* img = program_.find_image(pc);
    if (img == nullptr) throw GuestError("execution left every image at address " + std::to_string(pc));
    return img->instructions[pc - img->base];
  }

  struct Run {
    Executor& ex;
    RedundancyLog& log;
    BudgetServer& budget;
    AnalysisTool& tool;
    std::uint64_t seed;

    ExecutionOutcome out{};
    Time now = 0;
    Version version = Version::instrument;

    // The trace instance currently executing.
    TraceDescriptor* trace = nullptr;
    std::size_t offset = 0;
    std::size_t analysis_count = 0;
    std::size_t last_analyzed = 0;

    const CostModel& costs() const { return ex.config_.costs; }

    void event(EventKind kind, Address addr, bool flag = false, Region region = {}) {
      if (ex.config_.record_events) out.events.push_back({kind, now, addr, version, flag, std::move(region)});
    }

    // Looks up the trace at `addr` for the current version, running the
    // instrumentation routine on a cache miss.
    void enter(Address addr) {
      TraceDescriptor* t = ex.cache_.find(addr, version);
      if (t == nullptr) {
        TraceDescriptor formed =
            form_trace(ex.program_, addr, version, ex.config_.max_len, ex.config_.granularity, &ex.cache_);
        now += costs().instrumentation;
        ++out.compilations;
        if (version == Version::instrument) {
          Region candidate = formed.region();
          formed.instrumented = log.permit(candidate);
          out.decisions.push_back({candidate, formed.instrumented, out.committed.size()});
        }
        event(EventKind::compile, addr, formed.instrumented, formed.region());
        t = &ex.cache_.insert(std::move(formed));
      }
      trace = t;
      offset = 0;
      analysis_count = 0;
      last_analyzed = 0;
    }

    // Commits the instrumented portion of the instance being left. When a
    // version switch cut the instance short, the portion ends at the last
    // executed analysis call; otherwise the whole trace was instrumented.
    void leave(bool switched) {
      if (trace->version != Version::instrument || analysis_count == 0) return;
      std::size_t length = switched ? last_analyzed + 1 : trace->length;
      Region entry{trace->image, trace->rel_start, length};
      log.commit(entry);
      out.analyzed.insert(entry);
      event(EventKind::commit, trace->start, switched, entry);
      out.committed.push_back(std::move(entry));
    }

    ExecutionOutcome execute() {
      ex.cache_ = TraceCache{};
      tool.reset();
      GuestState guest(seed);
      enter(ex.program_.entry());

      while (true) {
        const Address addr = trace->start + offset;
        const Instruction& ins = ex.fetch(addr);
        bool analyze = false;

        if (trace->is_point(offset)) {
          bool available = budget.check(now);
          ++out.budget_checks;
          event(EventKind::check, addr, available);
          now += costs().budget_check;
          Version wanted = available ? Version::instrument : Version::base;
          if (wanted != version) {
            leave(true);
            ++out.version_switches;
            version = wanted;
            event(EventKind::version_switch, addr);
            enter(addr);
            continue;
          }
          analyze = version == Version::instrument && trace->instrumented;
        }

        Transfer tr = guest.step(ins);
        if (analyze) {
          event(EventKind::analysis, addr);
          budget.charge(costs().analysis, now);
          now += costs().analysis;
          tool.on_analysis(ins, tr);
          ++out.analysis_calls;
          ++analysis_count;
          last_analyzed = offset;
        }
        now += ins.cost;
        if (++out.steps > ex.config_.max_steps) throw GuestError("step limit exceeded");
        if (ex.config_.record_path) out.path.push_back(addr);

        if (tr.halted) {
          leave(false);
          break;
        }
        if (tr.taken || offset + 1 == trace->length) {
          leave(false);
          if (ex.program_.find_image(tr.next) == nullptr)
            throw GuestError("execution left every image at address " + std::to_string(tr.next));
          enter(tr.next);
        } else {
          ++offset;
        }
      }

      out.virtual_time = now;
      out.tool_output = tool.records();
      out.overshoots = budget.overshoots();
      out.budget_usage = budget.usage();
      return std::move(out);
    }
  };

  const Program& program_;
  ExecutorConfig config_;
  TraceCache cache_;
};

// Convenience wrapper around Executor::run.
inline ExecutionOutcome run(const Program& program, const ExecutorConfig& config, RedundancyLog& log,
                            BudgetServer& budget, AnalysisTool& tool, std::uint64_t seed) {
  Executor ex(program, config);
  return ex.run(log, budget, tool, seed);
}

}  // namespace dime
