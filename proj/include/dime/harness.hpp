#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "dime/analysis.hpp"
#include "dime/budget.hpp"
#include "dime/executor.hpp"
#include "dime/program.hpp"
#include "dime/redundancy_log.hpp"
#include "dime/region.hpp"

namespace dime {

// Everything a run or campaign needs besides the program itself.
struct RunConfig {
  std::string program_path;
  std::string tool = "branch";
  LogStrategy strategy = LogStrategy::hash;
  // Persisted log location; empty keeps the log text in memory.
  std::filesystem::path log_path;
  Time period = 10;
  Time budget = 1;
  bool unlimited_budget = false;
  ExecutorConfig exec;
  // Run k of a campaign uses seed + k.
  std::uint64_t seed = 0;
  bool resume = false;
};

inline BudgetServer make_budget(const RunConfig& config) {
  return config.unlimited_budget ? BudgetServer::unlimited() : BudgetServer(config.period, config.budget);
}

inline std::uint64_t run_seed(std::uint64_t campaign_seed, std::size_t run_index) {
  return campaign_seed + run_index;
}

struct OracleResult {
  std::uint64_t seed = 0;
  std::vector<BranchRecord> stream;
  std::set<BranchRecord> unique;
  Time native_time = 0;
  Time full_time = 0;

  double full_slowdown() const { return static_cast<double>(full_time) / static_cast<double>(native_time); }
};

// Reference results: a plain run for native time, and a run with every
// trace instrumented and no budget limit for the complete tool output.
inline OracleResult run_oracle(const Program& program, std::string_view tool_name, const ExecutorConfig& config,
                               std::uint64_t seed) {
  OracleResult result;
  result.seed = seed;
  Executor ex(program, config);
  result.native_time = ex.run_native(seed).virtual_time;

  RedundancyLog log(LogStrategy::none);
  BudgetServer budget = BudgetServer::unlimited();
  auto tool = make_tool(tool_name);
  ExecutionOutcome full = ex.run(log, budget, *tool, seed);
  result.full_time = full.virtual_time;
  result.stream = std::move(full.tool_output);
  result.unique.insert(result.stream.begin(), result.stream.end());
  return result;
}

enum class Classification { true_permit, true_reject, false_positive, false_negative };

inline std::string_view classification_name(Classification c) {
  switch (c) {
    case Classification::true_permit: return "true-permit";
    case Classification::true_reject: return "true-reject";
    case Classification::false_positive: return "FP";
    case Classification::false_negative: return "FN";
  }
  return "?";
}

// A permitted candidate overlapping anything already analyzed is a false
// positive; a rejected candidate containing anything never analyzed is a
// false negative.
inline Classification classify(bool permitted, const Region& candidate, const RegionSet& truth) {
  if (permitted) return truth.intersects(candidate) ? Classification::false_positive : Classification::true_permit;
  return truth.covers(candidate) ? Classification::true_reject : Classification::false_negative;
}

struct DecisionCounts {
  std::size_t permitted = 0;
  std::size_t rejected = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;

  double fp_ratio() const { return permitted == 0 ? 0.0 : double(false_positives) / double(permitted); }
  double fn_ratio() const { return rejected == 0 ? 0.0 : double(false_negatives) / double(rejected); }
};

// Classifies every permit decision of a run against the ground truth as it
// stood at that moment, and folds the run's commits into `truth`.
inline DecisionCounts classify_run(const ExecutionOutcome& outcome, RegionSet& truth) {
  DecisionCounts counts;
  std::size_t applied = 0;
  for (const auto& d : outcome.decisions) {
    for (; applied < d.commits_before; ++applied) truth.insert(outcome.committed[applied]);
    switch (classify(d.permitted, d.candidate, truth)) {
      case Classification::true_permit: ++counts.permitted; break;
      case Classification::false_positive: ++counts.permitted; ++counts.false_positives; break;
      case Classification::true_reject: ++counts.rejected; break;
      case Classification::false_negative: ++counts.rejected; ++counts.false_negatives; break;
    }
  }
  for (; applied < outcome.committed.size(); ++applied) truth.insert(outcome.committed[applied]);
  return counts;
}

struct RunReport {
  std::size_t run_index = 0;
  std::uint64_t seed = 0;
  double coverage = 0.0;
  bool coverage_vacuous = false;
  double fp_ratio = 0.0;
  double fn_ratio = 0.0;
  // Virtual time over the native time of the same guest path.
  double slowdown = 1.0;
  Time virtual_time = 0;
  Time native_time = 0;
  std::map<Time, std::size_t> overshoot_histogram;
  std::size_t unique_records = 0;       // this run
  std::size_t accumulated_records = 0;  // runs 1..k
  DecisionCounts decisions;
  std::uint64_t analysis_calls = 0;
  std::uint64_t version_switches = 0;
  std::size_t log_entries = 0;
  Time max_period_instrumentation = 0;
  std::vector<PeriodUsage> budget_usage;
  std::vector<BranchRecord> tool_output;
};

// How the first run of a campaign obtains its log.
enum class LogStart {
  empty,            // ignore any existing file
  load_if_present,  // use an existing file, else start empty
  require,          // the file must exist
};

// A sequence of runs sharing one persisted redundancy log. Runs are strictly
// sequential: each loads the log the previous one saved.
class Campaign {
 public:
  Campaign(const Program& program, RunConfig config, LogStart start = LogStart::empty)
      : program_(program), config_(std::move(config)), start_(start) {
    if (config_.resume) start_ = LogStart::require;
    make_tool(config_.tool);  // validate early
    make_budget(config_);
    oracle_ = run_oracle(program_, config_.tool, config_.exec, run_seed(config_.seed, 1));
  }

  const OracleResult& oracle() const { return oracle_; }
  const std::vector<RunReport>& reports() const { return reports_; }
  const RunConfig& config() const { return config_; }
  const RegionSet& ground_truth() const { return truth_; }

  // Executes the next run and returns its report.
  const RunReport& run_next() {
    const std::size_t index = reports_.size() + 1;
    RedundancyLog log = load();
    BudgetServer budget = make_budget(config_);
    auto tool = make_tool(config_.tool);
    Executor ex(program_, config_.exec);
    const std::uint64_t seed = run_seed(config_.seed, index);
    ExecutionOutcome outcome = ex.run(log, budget, *tool, seed);
    save(log);

    RunReport rep;
    rep.run_index = index;
    rep.seed = seed;
    rep.virtual_time = outcome.virtual_time;
    rep.native_time = ex.run_native(seed).virtual_time;
    rep.slowdown = double(outcome.virtual_time) / double(rep.native_time);
    rep.decisions = classify_run(outcome, truth_);
    rep.fp_ratio = rep.decisions.fp_ratio();
    rep.fn_ratio = rep.decisions.fn_ratio();

    std::set<BranchRecord> unique(outcome.tool_output.begin(), outcome.tool_output.end());
    rep.unique_records = unique.size();
    accumulated_.insert(unique.begin(), unique.end());
    rep.accumulated_records = accumulated_.size();
    if (oracle_.unique.empty()) {
      rep.coverage = 1.0;
      rep.coverage_vacuous = true;
    } else {
      std::size_t hit = 0;
      for (const auto& r : oracle_.unique) hit += accumulated_.count(r);
      rep.coverage = double(hit) / double(oracle_.unique.size());
    }

    for (const auto& o : outcome.overshoots) ++rep.overshoot_histogram[o.magnitude];
    rep.analysis_calls = outcome.analysis_calls;
    rep.version_switches = outcome.version_switches;
    rep.log_entries = log.size();
    for (const auto& u : outcome.budget_usage)
      rep.max_period_instrumentation = std::max(rep.max_period_instrumentation, u.instrumentation);
    rep.budget_usage = std::move(outcome.budget_usage);
    rep.tool_output = std::move(outcome.tool_output);
    reports_.push_back(std::move(rep));
    return reports_.back();
  }

  // Unique records gathered by all runs so far.
  const std::set<BranchRecord>& accumulated() const { return accumulated_; }

  // Persisted log text after the latest run (empty for strategy none).
  const std::string& log_text() const { return log_text_; }

 private:
  RedundancyLog load() {
    const bool first = reports_.empty();
    if (config_.strategy == LogStrategy::none) return RedundancyLog(LogStrategy::none);
    if (first && start_ == LogStart::empty) return RedundancyLog(config_.strategy);
    if (config_.log_path.empty()) {
      if (first) {
        if (start_ == LogStart::require) throw ConfigError("no log to resume from");
        return RedundancyLog(config_.strategy);
      }
      return parse_log(log_text_, config_.strategy);
    }
    return load_log(config_.log_path, config_.strategy, first && start_ == LogStart::require);
  }

  void save(RedundancyLog& log) {
    if (config_.strategy == LogStrategy::none) return;
    log_text_ = serialize_log(log);
    if (config_.log_path.empty()) return;
    std::ofstream out(config_.log_path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << log_text_) || !out.flush()) throw Error("cannot write log file " + config_.log_path.string());
  }

  const Program& program_;
  RunConfig config_;
  LogStart start_;
  OracleResult oracle_;
  std::vector<RunReport> reports_;
  std::set<BranchRecord> accumulated_;
  RegionSet truth_;
  std::string log_text_;
};

struct CampaignResult {
  OracleResult oracle;
  std::vector<RunReport> reports;
  std::string log_text;
};

inline CampaignResult run_campaign(const Program& program, const RunConfig& config, std::size_t runs,
                                   LogStart start = LogStart::empty) {
  if (runs == 0) throw ConfigError("a campaign needs at least one run");
  Campaign c(program, config, start);
  for (std::size_t i = 0; i < runs; ++i) c.run_next();
  return {c.oracle(), c.reports(), c.log_text()};
}

using Json = nlohmann::ordered_json;

inline Json config_json(const RunConfig& config) {
  Json j;
  j["program"] = config.program_path;
  j["tool"] = config.tool;
  j["log_strategy"] = strategy_name(config.strategy);
  j["granularity"] = granularity_name(config.exec.granularity);
  if (config.unlimited_budget) {
    j["period"] = "inf";
    j["budget"] = "inf";
  } else {
    j["period"] = config.period;
    j["budget"] = config.budget;
  }
  j["costs"] = {{"analysis", config.exec.costs.analysis},
                {"budget_check", config.exec.costs.budget_check},
                {"instrumentation", config.exec.costs.instrumentation}};
  j["max_len"] = config.exec.max_len;
  j["max_steps"] = config.exec.max_steps;
  j["seed"] = config.seed;
  return j;
}

inline Json run_report_json(const RunReport& r) {
  Json j;
  j["run"] = r.run_index;
  j["seed"] = r.seed;
  j["coverage"] = r.coverage;
  if (r.coverage_vacuous) j["coverage_vacuous"] = true;
  j["fp_ratio"] = r.fp_ratio;
  j["fn_ratio"] = r.fn_ratio;
  j["slowdown"] = r.slowdown;
  j["virtual_time"] = r.virtual_time;
  j["native_time"] = r.native_time;
  j["unique_records"] = r.unique_records;
  j["accumulated_records"] = r.accumulated_records;
  j["permitted"] = r.decisions.permitted;
  j["rejected"] = r.decisions.rejected;
  j["false_positives"] = r.decisions.false_positives;
  j["false_negatives"] = r.decisions.false_negatives;
  j["analysis_calls"] = r.analysis_calls;
  j["version_switches"] = r.version_switches;
  j["log_entries"] = r.log_entries;
  j["max_period_instrumentation"] = r.max_period_instrumentation;
  Json hist = Json::object();
  for (const auto& [magnitude, count] : r.overshoot_histogram) hist[std::to_string(magnitude)] = count;
  j["overshoot_histogram"] = std::move(hist);
  return j;
}

inline Json report_json(const RunConfig& config, const CampaignResult& result) {
  Json j;
  j["format"] = "dime-report v1";
  j["config"] = config_json(config);
  j["config"]["runs"] = result.reports.size();
  j["oracle"] = {{"seed", result.oracle.seed},
                 {"unique_records", result.oracle.unique.size()},
                 {"native_time", result.oracle.native_time},
                 {"full_time", result.oracle.full_time},
                 {"full_slowdown", result.oracle.full_slowdown()}};
  Json runs = Json::array();
  for (const auto& r : result.reports) runs.push_back(run_report_json(r));
  j["runs"] = std::move(runs);
  return j;
}

inline void emit_report(const Json& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << report.dump(2) << '\n') || !out.flush())
    throw Error("cannot write report " + path.string());
}

}  // namespace dime
