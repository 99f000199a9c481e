#include <gtest/gtest.h>

#include "generator.hpp"
#include "reference.hpp"
#include "util.hpp"

using namespace dime;

namespace {

bool gen_has_ndbr(const Program& p) {
  for (const auto& img : p.images())
    for (const auto& ins : img.instructions)
      if (ins.op == Opcode::ndbr) return true;
  return false;
}

RunConfig base_config() {
  RunConfig c;
  c.program_path = "p1_det.dime";
  c.strategy = LogStrategy::hash;
  c.period = 10;
  c.budget = 3;
  return c;
}

}  // namespace

TEST(Oracle, P1Deterministic) {
  Program p = test::load_sample("p1_det.dime");
  auto o = run_oracle(p, "branch", {}, 1);
  EXPECT_EQ(o.unique, (std::set<BranchRecord>{{BranchKind::jump, 1004, 1000}, {BranchKind::jump, 1002, 1005}}));
  EXPECT_EQ(o.native_time, 14);
  EXPECT_EQ(o.stream.size(), 3u);
}

TEST(Oracle, Vacuous) {
  Program p = parse_program("image m 0\nop 1\nop 2\nhalt\n");
  RunConfig c = base_config();
  auto result = run_campaign(p, c, 2);
  EXPECT_TRUE(result.oracle.unique.empty());
  for (const auto& r : result.reports) {
    EXPECT_DOUBLE_EQ(r.coverage, 1.0);
    EXPECT_TRUE(r.coverage_vacuous);
  }
}

TEST(Classify, Examples) {
  RegionSet truth;
  truth.insert({"main", 100, 20});
  EXPECT_EQ(classify(true, {"main", 150, 20}, truth), Classification::true_permit);
  EXPECT_EQ(classify(false, {"main", 100, 80}, truth), Classification::false_negative);
  EXPECT_EQ(classify(false, {"main", 105, 10}, truth), Classification::true_reject);
  truth.insert({"main", 100, 80});
  EXPECT_EQ(classify(true, {"main", 150, 20}, truth), Classification::false_positive);
}

TEST(Classify, TruthIsLive) {
  ExecutionOutcome out;
  out.committed = {{"m", 0, 5}};
  out.decisions = {{{"m", 0, 5}, true, 0}, {{"m", 2, 2}, true, 1}, {{"m", 1, 3}, false, 1}};
  RegionSet truth;
  auto counts = classify_run(out, truth);
  EXPECT_EQ(counts.permitted, 2u);
  EXPECT_EQ(counts.false_positives, 1u);
  EXPECT_EQ(counts.rejected, 1u);
  EXPECT_EQ(counts.false_negatives, 0u);
  EXPECT_DOUBLE_EQ(counts.fp_ratio(), 0.5);
  EXPECT_DOUBLE_EQ(counts.fn_ratio(), 0.0);
  EXPECT_TRUE(truth.covers({"m", 0, 5}));
}

TEST(Campaign, P1DeterministicHash) {
  Program p = test::load_sample("p1_det.dime");
  auto result = run_campaign(p, base_config(), 3);
  ASSERT_EQ(result.reports.size(), 3u);
  EXPECT_DOUBLE_EQ(result.reports[2].coverage, 1.0);
  double prev = 0;
  for (const auto& r : result.reports) {
    EXPECT_DOUBLE_EQ(r.fn_ratio, 0.0);
    EXPECT_GE(r.coverage, prev);
    prev = r.coverage;
    EXPECT_TRUE(r.overshoot_histogram.empty());
  }
}

TEST(Campaign, NativeMode) {
  Program p = test::load_sample("calls.dime");
  RunConfig c = base_config();
  c.strategy = LogStrategy::none;
  c.unlimited_budget = true;
  auto result = run_campaign(p, c, 1);
  EXPECT_DOUBLE_EQ(result.reports[0].coverage, 1.0);
  EXPECT_DOUBLE_EQ(result.reports[0].slowdown, result.oracle.full_slowdown());
  EXPECT_EQ(result.reports[0].tool_output, result.oracle.stream);
}

TEST(Campaign, PerRunSeeds) {
  Program p = test::load_sample("p1.dime");
  RunConfig c = base_config();
  c.seed = 40;
  auto result = run_campaign(p, c, 3);
  EXPECT_EQ(result.oracle.seed, 41u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(result.reports[k].seed, 41u + k);
}

TEST(Campaign, InvariantsOnGeneratedPrograms) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    test::ProgramGenerator gen(seed * 3);
    Program p = parse_program(gen.generate());
    for (auto s : {LogStrategy::hash, LogStrategy::bst, LogStrategy::merger}) {
      RunConfig c = base_config();
      c.strategy = s;
      c.period = 20;
      c.budget = 4;
      c.seed = seed;
      c.exec.costs.analysis = 2;
      Campaign camp(p, c);
      double prev = 0;
      for (int k = 0; k < 4; ++k) {
        const auto& r = camp.run_next();
        EXPECT_GE(r.coverage, prev);
        prev = r.coverage;
        if (s == LogStrategy::merger) {
          EXPECT_DOUBLE_EQ(r.fn_ratio, 0.0);
        }
        for (const auto& [mag, _] : r.overshoot_histogram) EXPECT_LE(mag, 2);
        EXPECT_LE(r.max_period_instrumentation, 4 + 2);
        std::set<BranchRecord> u(r.tool_output.begin(), r.tool_output.end());
        if (!gen_has_ndbr(p)) {
          for (const auto& rec : u) EXPECT_TRUE(camp.oracle().unique.count(rec));
        }
      }
    }
  }
}

TEST(Campaign, InMemoryAndFileLogsAgree) {
  test::ScratchDir dir("campaign");
  Program p = test::load_sample("p1.dime");
  RunConfig mem = base_config();
  mem.strategy = LogStrategy::bst;
  RunConfig file = mem;
  file.log_path = dir / "log.txt";
  auto a = run_campaign(p, mem, 3);
  auto b = run_campaign(p, file, 3);
  EXPECT_EQ(a.log_text, b.log_text);
  EXPECT_EQ(test::slurp(file.log_path), b.log_text);
  EXPECT_EQ(report_json(mem, a)["runs"], report_json(file, b)["runs"]);
}

TEST(Campaign, ResumeNeedsLog) {
  test::ScratchDir dir("resume");
  Program p = test::load_sample("p1.dime");
  RunConfig c = base_config();
  c.log_path = dir / "absent.log";
  c.resume = true;
  EXPECT_THROW(run_campaign(p, c, 1), ConfigError);
  c.resume = false;
  run_campaign(p, c, 1);
  c.resume = true;
  EXPECT_NO_THROW(run_campaign(p, c, 1));
  c.strategy = LogStrategy::merger;
  EXPECT_THROW(run_campaign(p, c, 1, LogStart::load_if_present), LogFormatError);
}

TEST(Report, Shape) {
  Program p = test::load_sample("p1_det.dime");
  RunConfig c = base_config();
  auto j = report_json(c, run_campaign(p, c, 3));
  EXPECT_EQ(j["format"], "dime-report v1");
  EXPECT_EQ(j["config"]["log_strategy"], "hash");
  EXPECT_EQ(j["runs"].size(), 3u);
  for (const auto& r : j["runs"]) {
    for (const char* key : {"run", "coverage", "fp_ratio", "fn_ratio", "slowdown", "overshoot_histogram",
                            "unique_records", "virtual_time"})
      EXPECT_TRUE(r.contains(key)) << key;
    EXPECT_GE(r["slowdown"].get<double>(), 1.0);
  }
}

// The hash log keys traces by start address only. A trace whose rarely taken
// branch never met available budget in the first run is rejected in every
// later run, and a run without analysis calls never switches versions, so
// nothing new is formed: coverage reaches a fixed point below 1.
TEST(Campaign, HashCanStallBelowFullCoverage) {
  Program p = parse_program(R"(image main 1000
top:  op 1
      br a9 NT
      op 2
      op 1
      op 2
      jmp a7
      halt
a7:   op 1
      op 2
a9:   op 1
      br a18 TNT
      br a16 TTTN
      op 2
      op 2
      op 1
      op 2
a16:  op 1
      op 1
a18:  op 1
      jmp a21
      halt
a21:  op 1
a22:  op 1
      op 1
      op 2
      op 2
      jmp a28
      halt
a28:  op 1
      op 3
      jmp a32
      halt
a32:  op 1
      op 1
      br a22 TNT
      op 1
      br top TTTTTTTTTTTTTTTTTTTN
      halt
)");
  RunConfig c;
  c.strategy = LogStrategy::hash;
  c.period = 100;
  c.budget = 10;
  Campaign camp(p, c);
  for (int k = 0; k < 10; ++k) camp.run_next();
  const BranchRecord rare{BranchKind::jump, 1011, 1016};
  EXPECT_TRUE(camp.oracle().unique.count(rare));
  EXPECT_FALSE(camp.accumulated().count(rare));
  EXPECT_LT(camp.reports().back().coverage, 1.0);
  EXPECT_EQ(camp.reports()[1].analysis_calls, 0u);
  EXPECT_EQ(camp.reports()[9].coverage, camp.reports()[1].coverage);
}

TEST(Campaign, SlowdownUsesEachRunsOwnPath) {
  Program p = test::load_sample("p1.dime");
  RunConfig c = base_config();
  c.strategy = LogStrategy::merger;
  c.seed = 7;
  auto result = run_campaign(p, c, 6);
  for (const auto& r : result.reports) {
    EXPECT_EQ(r.native_time, test::reference_run(p, r.seed).native_time);
    EXPECT_GE(r.slowdown, 1.0);
  }
}
