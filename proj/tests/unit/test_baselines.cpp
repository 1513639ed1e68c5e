#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <unordered_map>

#include "cib/bench.hpp"
#include "cib/btree_index.hpp"
#include "cib/cib_index.hpp"
#include "cib/trad_dir.hpp"

namespace cib {
namespace {

std::string name_of(std::uint64_t i) { return "file" + std::to_string(i); }

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::BadImage;
}

// Random create/open/delete mix checked op by op against a map.
void fuzz_against_map(Directory& d, std::uint64_t seed, int ops, int pool) {
  std::mt19937_64 rng(seed);
  std::unordered_map<std::string, InodeNo> oracle;
  for (int i = 0; i < ops; ++i) {
    const std::string n = name_of(rng() % pool);
    const auto it = oracle.find(n);
    switch (rng() % 3) {
      case 0:
        if (it != oracle.end()) {
          ASSERT_EQ(code_of([&] { d.create(n, i + 1); }), Errc::AlreadyExists);
        } else {
          d.create(n, i + 1);
          oracle[n] = i + 1;
        }
        break;
      case 1:
        ASSERT_EQ(d.find(n), it == oracle.end() ? std::nullopt : std::optional<InodeNo>(it->second)) << n;
        break;
      default:
        if (it == oracle.end()) {
          ASSERT_EQ(code_of([&] { d.remove(n); }), Errc::NotFound);
        } else {
          d.remove(n);
          oracle.erase(it);
        }
    }
  }
  auto ls = d.readdir();
  std::sort(ls.begin(), ls.end());
  std::vector<DirEntry> want;
  for (const auto& [n, ino] : oracle) want.push_back({n, ino});
  std::sort(want.begin(), want.end());
  ASSERT_EQ(ls, want);
}

// ---------------------------------------------------------------- sequential

TEST(TradDir, EmptyDirectory) {
  PmRegion r(4 << 20);
  TradDirectory d = TradDirectory::format(r);
  EXPECT_FALSE(d.find("x"));
  EXPECT_EQ(code_of([&] { d.remove("x"); }), Errc::NotFound);
  EXPECT_TRUE(d.readdir().empty());
  EXPECT_EQ(d.block_count(), 0u);
}

TEST(TradDir, FirstCreateLandsAtBlockStart) {
  PmRegion r(4 << 20);
  TradDirectory d = TradDirectory::format(r);
  d.create("hello", 7);
  ASSERT_EQ(d.blocks().size(), 1u);
  const auto recs = d.records(d.blocks()[0]);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].at, d.blocks()[0]);
  EXPECT_EQ(recs[0].name, "hello");
  EXPECT_EQ(recs[0].d_len, TradDirectory::record_len(5));
  EXPECT_EQ(recs[1].inode_no, 0u);
  EXPECT_EQ(recs[0].d_len + recs[1].d_len, 4096u);
}

TEST(TradDir, ProbeCountEqualsRecordsScanned) {
  PmRegion r(8 << 20);
  TradDirectory d = TradDirectory::format(r);
  const int n = 500;
  for (int i = 0; i < n; ++i) d.create(name_of(i), i + 1);
  std::uint64_t records = 0;
  for (Offset b : d.blocks()) records += d.records(b).size();
  EXPECT_EQ(d.open(name_of(n - 1)), static_cast<InodeNo>(n));
  // Everything before the last record, plus the last record itself.
  const std::uint64_t before_last = [&] {
    std::uint64_t k = 0;
    for (Offset b : d.blocks()) {
      for (const auto& rec : d.records(b)) {
        ++k;
        if (rec.name == name_of(n - 1)) return k;
      }
    }
    return k;
  }();
  EXPECT_EQ(d.probes().last(), before_last);
  EXPECT_FALSE(d.find("absent"));
  EXPECT_EQ(d.probes().last(), records);
}

TEST(TradDir, ProbesGrowLinearly) {
  PmRegion r(16 << 20);
  TradDirectory d = TradDirectory::format(r);
  std::vector<std::uint64_t> at;
  for (int i = 1; i <= 4000; ++i) {
    d.create(name_of(i), i);
    if (i % 1000 == 0) at.push_back(d.probes().last());
  }
  for (std::size_t k = 0; k < at.size(); ++k) {
    EXPECT_GE(at[k], 1000 * (k + 1)) << "create " << 1000 * (k + 1);
  }
}

TEST(TradDir, DeletedHoleIsReused) {
  PmRegion r(4 << 20);
  TradDirectory d = TradDirectory::format(r);
  for (int i = 0; i < 10; ++i) d.create(name_of(i), i + 1);
  const Offset blk = d.blocks()[0];
  const auto before = d.records(blk);
  d.remove(name_of(3));
  d.create("file9x", 77);  // same record length as file3
  const auto after = d.records(blk);
  EXPECT_EQ(after[3].at, before[3].at);
  EXPECT_EQ(after[3].name, "file9x");
  EXPECT_EQ(after.size(), before.size());
  EXPECT_TRUE(d.check().empty());
}

TEST(TradDir, DeleteCoalescesWithFollowingHole) {
  PmRegion r(4 << 20);
  TradDirectory d = TradDirectory::format(r);
  d.create("a", 1);
  d.create("b", 2);
  d.remove("b");
  d.remove("a");
  const auto recs = d.records(d.blocks()[0]);
  ASSERT_EQ(recs.size(), 1u);  // "b" merged into the tail hole, then "a" absorbed both
  EXPECT_EQ(recs[0].inode_no, 0u);
  EXPECT_EQ(recs[0].d_len, 4096u);
  EXPECT_TRUE(d.check().empty());
  d.create("longer-name-than-either", 3);
  EXPECT_EQ(d.records(d.blocks()[0])[0].name, "longer-name-than-either");
}

TEST(TradDir, RandomOpsMatchOracle) {
  PmRegion r(32 << 20);
  TradDirectory d = TradDirectory::format(r);
  fuzz_against_map(d, 3, 8000, 1500);
  EXPECT_TRUE(d.check().empty());
}

TEST(TradDir, SpansManyIndexPages) {
  PmRegion r(64 << 20);
  TradDirectory d = TradDirectory::format(r);
  const std::string pad(200, 'p');
  for (int i = 0; i < 10500; ++i) d.create(pad + std::to_string(i), i + 1);
  EXPECT_GT(d.block_count(), TradDirectory::kIndexFanout);
  EXPECT_EQ(d.blocks().size(), d.block_count());
  EXPECT_EQ(d.open(pad + "10499"), 10500u);
  EXPECT_TRUE(d.check().empty());
}

// ------------------------------------------------------------------- B+-tree

class BTreeModes : public ::testing::TestWithParam<bool> {};

TEST_P(BTreeModes, AscendingKeysSplitTheRoot) {
  PmRegion r(8 << 20);
  BTreeDirectory d = BTreeDirectory::format(r, {.shadow = GetParam()});
  const Offset np = append_name(r, "k");
  for (std::uint64_t k = 1; k <= BTreeDirectory::kMaxLeafEntries; ++k) d.bt_insert(k, np, k);
  EXPECT_EQ(d.height(), 1u);
  d.bt_insert(BTreeDirectory::kMaxLeafEntries + 1, np, 999);
  EXPECT_EQ(d.height(), 2u);
  EXPECT_EQ(d.size(), BTreeDirectory::kMaxLeafEntries + 1u);
  EXPECT_TRUE(d.validate(true).empty());
  for (std::uint64_t k = 1; k <= BTreeDirectory::kMaxLeafEntries; ++k) ASSERT_EQ(d.bt_lookup(k, "k"), k);
}

TEST_P(BTreeModes, HundredThousandRandomKeysMatchOracle) {
  PmRegion r(1ULL << 30);
  BTreeDirectory d = BTreeDirectory::format(r, {.shadow = GetParam()});
  std::mt19937_64 rng(1);
  std::unordered_map<std::string, InodeNo> oracle;
  for (int i = 0; i < 100000; ++i) {
    const std::string n = "r" + std::to_string(rng());
    d.create(n, i + 1);
    oracle[n] = i + 1;
  }
  EXPECT_TRUE(d.validate(true).empty());
  EXPECT_GE(d.height(), 3u);
  for (const auto& [n, ino] : oracle) ASSERT_EQ(d.find(n), ino);
  for (int i = 0; i < 1000; ++i) ASSERT_FALSE(d.find("missing" + std::to_string(i)));
}

TEST_P(BTreeModes, DuplicateHashKeysStraddleLeaves) {
  PmRegion r(16 << 20);
  BTreeDirectory d = BTreeDirectory::format(r, {.shadow = GetParam()});
  std::vector<Offset> names;
  for (int i = 0; i < 600; ++i) names.push_back(append_name(r, name_of(i)));
  for (int i = 0; i < 600; ++i) d.bt_insert(i % 3 == 0 ? 777 : static_cast<HashKey>(i), names[i], i + 1);
  EXPECT_TRUE(d.validate(false).empty());
  for (int i = 0; i < 600; i += 3) ASSERT_EQ(d.bt_lookup(777, name_of(i)), static_cast<InodeNo>(i + 1)) << i;
  for (int i = 0; i < 600; i += 6) d.bt_delete(777, name_of(i));
  for (int i = 0; i < 600; i += 3) {
    ASSERT_EQ(d.bt_lookup(777, name_of(i)).has_value(), i % 6 != 0) << i;
  }
  EXPECT_TRUE(d.validate(false).empty());
}

TEST_P(BTreeModes, RandomOpsMatchOracle) {
  PmRegion r(256 << 20);
  BTreeDirectory d = BTreeDirectory::format(r, {.shadow = GetParam()});
  fuzz_against_map(d, 8, 30000, 3000);
  EXPECT_TRUE(d.validate(false).empty());
}

TEST_P(BTreeModes, LookupIsReadOnly) {
  PmRegion r(64 << 20);
  BTreeDirectory d = BTreeDirectory::format(r, {.shadow = GetParam()});
  for (int i = 0; i < 5000; ++i) d.create(name_of(i), i + 1);
  const WriteStats s = r.stats();
  for (int i = 0; i < 6000; ++i) (void)d.find(name_of(i));
  (void)d.readdir();
  EXPECT_EQ(r.stats(), s);
}

INSTANTIATE_TEST_SUITE_P(Shadow, BTreeModes, ::testing::Values(true, false),
                         [](const auto& info) { return info.param ? "Shadow" : "InPlace"; });

TEST(BTree, SortedInsertWritesFarMoreThanCib) {
  PmRegion rb(1ULL << 30);
  PmRegion rc(1ULL << 30);
  BTreeDirectory b = BTreeDirectory::format(rb, {.shadow = false});
  CibDirectory c = CibDirectory::format(rc);
  for (int i = 0; i < 20000; ++i) {
    b.create(name_of(i), i + 1);
    c.create(name_of(i), i + 1);
  }
  EXPECT_GT(rb.stats().bytes_written, 3 * rc.stats().bytes_written);
}

TEST(BTree, ShadowingFreesReplacedNodes) {
  PmRegion r(256 << 20);
  BTreeDirectory d = BTreeDirectory::format(r);
  for (int i = 0; i < 20000; ++i) d.create(name_of(i), i + 1);
  // Reclaimed nodes keep the allocated footprint near the live tree size.
  EXPECT_LT(r.bump(), 64ULL << 20);
}

// ------------------------------------------------------------- cross-scheme

TEST(CrossScheme, SameWorkloadSameAnswers) {
  for (std::uint64_t seed : {1, 2, 3}) {
    bench::WorkloadSpec spec;
    spec.kind = bench::WorkloadKind::CrashFuzz;
    spec.ops = 6000;
    spec.seed = seed;
    const bench::Workload w = bench::gen_workload(spec);
    std::vector<std::vector<bench::Expectation>> answers;
    std::vector<std::vector<DirEntry>> listings;
    for (auto scheme : {bench::Scheme::Cib, bench::Scheme::Trad, bench::Scheme::BTree}) {
      PmRegion r(256 << 20);
      auto d = bench::make_directory(r, scheme);
      std::vector<bench::Expectation> got;
      for (const auto& op : w.ops) got.push_back(bench::apply(*d, w, op));
      answers.push_back(std::move(got));
      auto ls = d->readdir();
      std::sort(ls.begin(), ls.end());
      listings.push_back(std::move(ls));
    }
    for (std::size_t s = 1; s < answers.size(); ++s) {
      ASSERT_EQ(listings[s], listings[0]);
      for (std::size_t i = 0; i < w.ops.size(); ++i) {
        ASSERT_EQ(answers[s][i].outcome, answers[0][i].outcome) << "op " << i;
        ASSERT_EQ(answers[s][i].inode, answers[0][i].inode) << "op " << i;
      }
    }
  }
}

TEST(CrossScheme, AttachDispatchesOnKindTag) {
  PmRegion r(16 << 20);
  auto c = bench::make_directory(r, bench::Scheme::Cib);
  auto t = bench::make_directory(r, bench::Scheme::Trad);
  auto b = bench::make_directory(r, bench::Scheme::BTree);
  c->create("x", 1);
  t->create("x", 2);
  b->create("x", 3);
  EXPECT_EQ(bench::attach_directory(r, c->inode_area())->open("x"), 1u);
  EXPECT_EQ(bench::attach_directory(r, t->inode_area())->open("x"), 2u);
  EXPECT_EQ(bench::attach_directory(r, b->inode_area())->open("x"), 3u);
  EXPECT_EQ(code_of([&] { (void)bench::attach_directory(r, PmRegion::kInodeTable + 3 * 64); }), Errc::CorruptLayout);
}

}  // namespace
}  // namespace cib
