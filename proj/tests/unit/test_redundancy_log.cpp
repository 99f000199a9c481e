#include <gtest/gtest.h>

#include <bitset>
#include <random>

#include "util.hpp"

using namespace dime;

namespace {

RedundancyLog with(LogStrategy s, std::initializer_list<Region> entries) {
  RedundancyLog log(s);
  for (const auto& e : entries) log.commit(e);
  return log;
}

Region r(Address start, std::uint64_t len) { return {"main", start, len}; }

}  // namespace

TEST(RedundancyLog, WorkedPermitExamples) {
  EXPECT_TRUE(with(LogStrategy::hash, {r(100, 80)}).permit(r(150, 20)));
  EXPECT_FALSE(with(LogStrategy::hash, {r(100, 20)}).permit(r(100, 80)));
  EXPECT_FALSE(with(LogStrategy::bst, {r(50, 80)}).permit(r(100, 200)));
  EXPECT_TRUE(with(LogStrategy::merger, {r(50, 80)}).permit(r(100, 200)));
  for (auto s : {LogStrategy::none, LogStrategy::hash, LogStrategy::bst, LogStrategy::merger})
    EXPECT_TRUE(RedundancyLog(s).permit(r(7, 3)));
}

TEST(RedundancyLog, WorkedCommitExamples) {
  auto merger = with(LogStrategy::merger, {r(50, 80), r(100, 200)});
  EXPECT_EQ(merger.entries(), (std::vector<LogEntry>{{"main", 50, 250}}));

  auto hash = with(LogStrategy::hash, {r(100, 20), r(100, 20)});
  EXPECT_EQ(hash.entries(), (std::vector<LogEntry>{{"main", 100, std::nullopt}}));

  auto bst = with(LogStrategy::bst, {r(100, 20), r(100, 80)});
  EXPECT_EQ(bst.entries(), (std::vector<LogEntry>{{"main", 100, 80}}));
}

TEST(RedundancyLog, BstFinalize) {
  auto bst = with(LogStrategy::bst, {r(100, 50), r(150, 50)});
  bst.finalize();
  EXPECT_EQ(bst.entries(), (std::vector<LogEntry>{{"main", 100, 100}}));

  auto gap = with(LogStrategy::bst, {r(100, 50), r(151, 50)});
  gap.finalize();
  EXPECT_EQ(gap.entries().size(), 2u);

  auto chain = with(LogStrategy::bst, {r(0, 2), r(2, 3), r(5, 1), r(10, 1)});
  chain.finalize();
  EXPECT_EQ(chain.entries(), (std::vector<LogEntry>{{"main", 0, 6}, {"main", 10, 1}}));
}

TEST(RedundancyLog, HashSerializesSorted) {
  auto hash = with(LogStrategy::hash, {r(150, 1), r(100, 1)});
  EXPECT_EQ(serialize_log(hash), "# dime-log v1 strategy=hash\nmain,100\nmain,150\n");
}

TEST(RedundancyLog, MergerStrictContainment) {
  auto m = with(LogStrategy::merger, {r(10, 10)});
  EXPECT_FALSE(m.permit(r(10, 5)));
  EXPECT_FALSE(m.permit(r(12, 7)));
  EXPECT_TRUE(m.permit(r(12, 8)));  // ends exactly at the entry's end
  EXPECT_TRUE(m.permit(r(5, 3)));
  EXPECT_TRUE(m.permit(r(20, 1)));
  EXPECT_TRUE(m.permit({"other", 12, 1}));
}

TEST(RedundancyLog, HashIgnoresLength) {
  std::mt19937_64 rng(11);
  RedundancyLog log(LogStrategy::hash);
  for (int i = 0; i < 200; ++i) log.commit(r(rng() % 500, 1 + rng() % 40));
  for (int q = 0; q < 2000; ++q) {
    Address start = rng() % 600;
    bool first = log.permit(r(start, 1));
    for (std::uint64_t len : {2u, 17u, 400u}) EXPECT_EQ(log.permit(r(start, len)), first);
  }
}

TEST(RedundancyLog, BstMatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    RedundancyLog log(LogStrategy::bst);
    std::vector<Region> committed;
    const std::size_t n = 1 + rng() % 1000;
    for (std::size_t i = 0; i < n; ++i) {
      Region e = r(rng() % 20000, 1 + rng() % 60);
      log.commit(e);
      committed.push_back(e);
    }
    for (int q = 0; q < 10000; ++q) {
      Region cand = r(rng() % 21000, 1 + rng() % 60);
      bool inside = false;
      for (const auto& e : committed) inside |= e.start <= cand.start && cand.start < e.end();
      ASSERT_EQ(log.permit(cand), !inside);
    }
  }
}

TEST(RedundancyLog, MergerDisjointUnion) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    RedundancyLog log(LogStrategy::merger);
    std::bitset<1024> bits;
    for (int i = 0; i < 60; ++i) {
      Region e = r(rng() % 960, 1 + rng() % 50);
      log.commit(e);
      for (auto k = e.start; k < e.end(); ++k) bits.set(k);
      auto entries = log.entries();
      std::size_t covered = 0;
      for (std::size_t j = 0; j < entries.size(); ++j) {
        covered += *entries[j].length;
        if (j > 0) {
          ASSERT_LT(entries[j - 1].rel_addr + *entries[j - 1].length, entries[j].rel_addr);
        }
        for (auto k = entries[j].rel_addr; k < entries[j].rel_addr + *entries[j].length; ++k) ASSERT_TRUE(bits.test(k));
      }
      ASSERT_EQ(covered, bits.count());
    }
  }
}

TEST(RedundancyLog, UnionNeverShrinks) {
  std::mt19937_64 rng(13);
  for (auto s : {LogStrategy::bst, LogStrategy::merger}) {
    RedundancyLog log(s);
    std::uint64_t prev = 0;
    for (int i = 0; i < 300; ++i) {
      log.commit(r(rng() % 2000, 1 + rng() % 30));
      if (i % 7 == 0) log.finalize();
      RegionSet u;
      for (const auto& e : log.entries()) u.insert({e.image, e.rel_addr, *e.length});
      ASSERT_GE(u.measure(), prev);
      prev = u.measure();
    }
  }
}

TEST(RedundancyLog, SaveLoadRoundTrip) {
  test::ScratchDir dir("log");
  std::mt19937_64 rng(17);
  for (auto s : {LogStrategy::hash, LogStrategy::bst, LogStrategy::merger}) {
    RedundancyLog log(s);
    for (int i = 0; i < 100; ++i) log.commit({i % 3 ? "main" : "lib", rng() % 500, 1 + rng() % 20});
    auto path = dir / std::string(strategy_name(s));
    save_log(log, path);
    RedundancyLog back = load_log(path, s);
    EXPECT_EQ(back.entries(), log.entries());
    EXPECT_EQ(serialize_log(back), test::slurp(path));
  }
}

TEST(RedundancyLog, ResumeRules) {
  test::ScratchDir dir("resume");
  EXPECT_THROW(load_log(dir / "missing", LogStrategy::hash, true), ConfigError);
  EXPECT_EQ(load_log(dir / "missing", LogStrategy::hash, false).size(), 0u);
}

TEST(RedundancyLog, SchemaErrors) {
  EXPECT_THROW(parse_log("# dime-log v1 strategy=hash\nmain,100,20\n"), LogFormatError);
  EXPECT_THROW(parse_log("# dime-log v1 strategy=bst\nmain,100\n"), LogFormatError);
  EXPECT_THROW(parse_log("main,100\n"), LogFormatError);
  EXPECT_THROW(parse_log("# dime-log v1 strategy=bst\nmain,100,0\n"), LogFormatError);
  EXPECT_THROW(parse_log("# dime-log v1 strategy=bst\nmain,x,3\n"), LogFormatError);
  EXPECT_THROW(parse_log("# dime-log v1 strategy=hash\nmain,1\n", LogStrategy::bst), LogFormatError);
  EXPECT_NO_THROW(parse_log("# dime-log v1 strategy=merger\nmain,1,4\n", LogStrategy::merger));
}

TEST(RedundancyLog, ZeroLengthCommitIsRejected) {
  RedundancyLog log(LogStrategy::bst);
  EXPECT_THROW(log.commit(r(3, 0)), ContractViolation);
}

TEST(RedundancyLog, NoneHasNoFile) {
  RedundancyLog log(LogStrategy::none);
  EXPECT_THROW(serialize_log(log), ConfigError);
}
