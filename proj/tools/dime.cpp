// dime: command-line driver for the time-aware instrumentation simulator.
//
//   dime oracle   --program P --tool T
//   dime run      --program P --tool T --log-strategy S --log-file F --budget B --period T --seed N ...
//   dime campaign --runs K ... (same flags as run)
//   dime report   --in F.json
//
// Exit codes: 0 success, 1 configuration error, 2 guest error.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dime/dime.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kGuestError = 2;

struct Options {
  std::string program;
  std::string tool = "branch";
  std::string strategy = "hash";
  std::string log_file;
  std::string budget = "1";
  dime::Time period = 10;
  std::uint64_t seed = 0;
  std::string granularity = "ctrl";
  dime::Time ca = 1;
  dime::Time cbc = 0;
  dime::Time cir = 0;
  std::size_t max_len = 16;
  std::uint64_t max_steps = 1'000'000;
  std::size_t runs = 1;
  bool resume = false;
  std::string report;
  std::string tool_output;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dime::ConfigError("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

dime::Program load_program(const std::string& path) { return dime::parse_program(read_file(path)); }

dime::ExecutorConfig exec_config(const Options& o) {
  dime::ExecutorConfig c;
  c.granularity = dime::parse_granularity(o.granularity);
  c.costs = {o.ca, o.cbc, o.cir};
  c.max_len = o.max_len;
  c.max_steps = o.max_steps;
  return c;
}

dime::RunConfig run_config(const Options& o) {
  dime::RunConfig c;
  c.program_path = o.program;
  c.tool = o.tool;
  c.strategy = dime::parse_strategy(o.strategy);
  c.log_path = o.log_file;
  c.period = o.period;
  if (o.budget == "inf") {
    c.unlimited_budget = true;
  } else {
    auto b = dime::detail::parse_uint<dime::Time>(o.budget);
    if (!b) throw dime::ConfigError("bad --budget '" + o.budget + "'");
    c.budget = *b;
  }
  c.exec = exec_config(o);
  c.seed = o.seed;
  c.resume = o.resume;
  if (c.strategy != dime::LogStrategy::none && c.log_path.empty())
    throw dime::ConfigError("--log-file is required for strategy '" + o.strategy + "'");
  return c;
}

void write_tool_output(const std::string& path, const std::string& tool, const std::vector<dime::BranchRecord>& records,
                       dime::Address entry) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw dime::Error("cannot write " + path);
  if (tool == "cct") out << dime::build_cct(records, entry).dump();
  else out << dime::format_records(records);
}

void write_json(const dime::Json& j, const std::string& path) {
  if (path.empty() || path == "-") std::cout << j.dump(2) << '\n';
  else dime::emit_report(j, path);
}

int cmd_oracle(const Options& o) {
  auto program = load_program(o.program);
  auto oracle = dime::run_oracle(program, o.tool, exec_config(o), o.seed);
  dime::Json j;
  j["seed"] = oracle.seed;
  j["native_time"] = oracle.native_time;
  j["full_time"] = oracle.full_time;
  j["full_slowdown"] = oracle.full_slowdown();
  j["unique_records"] = oracle.unique.size();
  dime::Json recs = dime::Json::array();
  for (const auto& r : oracle.unique) {
    std::ostringstream s;
    s << r;
    recs.push_back(s.str());
  }
  j["records"] = std::move(recs);
  if (o.tool == "cct") {
    auto tree = dime::build_cct(oracle.stream, program.entry());
    j["cct_nodes"] = tree.node_count();
    j["cct_edges"] = tree.edge_count();
  }
  if (!o.tool_output.empty()) write_tool_output(o.tool_output, o.tool, oracle.stream, program.entry());
  write_json(j, o.report);
  return 0;
}

int cmd_run(const Options& o, bool campaign) {
  auto program = load_program(o.program);
  auto config = run_config(o);
  auto start = campaign ? dime::LogStart::empty : dime::LogStart::load_if_present;
  auto result = dime::run_campaign(program, config, campaign ? o.runs : 1, start);
  if (!o.tool_output.empty())
    write_tool_output(o.tool_output, o.tool, result.reports.back().tool_output, program.entry());
  write_json(dime::report_json(config, result), o.report);
  return 0;
}

int cmd_report(const std::string& in) {
  dime::Json j;
  try {
    j = dime::Json::parse(read_file(in));
  } catch (const nlohmann::json::exception& e) {
    throw dime::ConfigError(std::string("bad report: ") + e.what());
  }
  const auto& cfg = j.at("config");
  std::cout << "program " << cfg.at("program").get<std::string>() << "  tool " << cfg.at("tool").get<std::string>()
            << "  strategy " << cfg.at("log_strategy").get<std::string>() << "\n";
  std::cout << "oracle: " << j.at("oracle").at("unique_records") << " unique records, native time "
            << j.at("oracle").at("native_time") << ", full slow-down " << std::fixed << std::setprecision(2)
            << j.at("oracle").at("full_slowdown").get<double>() << "x\n";
  std::cout << " run  coverage  fp_ratio  fn_ratio  slowdown  overshoots\n";
  for (const auto& r : j.at("runs")) {
    std::size_t overshoots = 0;
    for (const auto& [_, count] : r.at("overshoot_histogram").items()) overshoots += count.get<std::size_t>();
    std::cout << std::setw(4) << r.at("run").get<std::size_t>() << std::setw(10) << r.at("coverage").get<double>()
              << std::setw(10) << r.at("fp_ratio").get<double>() << std::setw(10) << r.at("fn_ratio").get<double>()
              << std::setw(10) << r.at("slowdown").get<double>() << std::setw(12) << overshoots << '\n';
  }
  return 0;
}

void add_common(CLI::App* sub, Options& o, bool budgeted) {
  sub->add_option("--program", o.program, "program file")->required();
  sub->add_option("--tool", o.tool, "analysis tool: branch | cct")->capture_default_str();
  sub->add_option("--seed", o.seed, "seed for ndbr outcomes")->capture_default_str();
  sub->add_option("--granularity", o.granularity, "instrumentation points: ctrl | all")->capture_default_str();
  sub->add_option("--ca", o.ca, "cost of one analysis call")->capture_default_str();
  sub->add_option("--cbc", o.cbc, "cost of one budget check")->capture_default_str();
  sub->add_option("--cir", o.cir, "cost of forming one trace")->capture_default_str();
  sub->add_option("--max-len", o.max_len, "maximum trace length")->capture_default_str();
  sub->add_option("--max-steps", o.max_steps, "guest step limit")->capture_default_str();
  sub->add_option("--tool-output", o.tool_output, "write the tool output of the (last) run here");
  sub->add_option("--report", o.report, "write the JSON report here (default: stdout)");
  if (!budgeted) return;
  sub->add_option("--log-strategy", o.strategy, "redundancy log: none | hash | bst | merger")->capture_default_str();
  sub->add_option("--log-file", o.log_file, "persisted redundancy log");
  sub->add_option("--budget", o.budget, "budget per period, or 'inf'")->capture_default_str();
  sub->add_option("--period", o.period, "period length")->capture_default_str();
  sub->add_flag("--resume", o.resume, "require an existing log file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-aware dynamic binary instrumentation simulator"};
  app.require_subcommand(1);
  Options o;
  std::string report_in;

  auto* oracle = app.add_subcommand("oracle", "native and fully instrumented reference runs");
  add_common(oracle, o, false);
  auto* run = app.add_subcommand("run", "one budgeted run against a persisted log");
  add_common(run, o, true);
  auto* campaign = app.add_subcommand("campaign", "several budgeted runs sharing one log");
  add_common(campaign, o, true);
  campaign->add_option("--runs", o.runs, "number of runs")->required()->check(CLI::PositiveNumber);
  auto* report = app.add_subcommand("report", "summarize a JSON report");
  report->add_option("--in", report_in, "report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*oracle) return cmd_oracle(o);
    if (*run) return cmd_run(o, false);
    if (*campaign) return cmd_run(o, true);
    if (*report) return cmd_report(report_in);
  } catch (const dime::GuestError& e) {
    std::cerr << "guest error: " << e.what() << '\n';
    return kGuestError;
  } catch (const dime::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: bad report: " << e.what() << '\n';
    return kConfigError;
  }
  return 0;
}
