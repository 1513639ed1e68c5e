// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cib/bench.hpp"
#include "cib/cib_index.hpp"

namespace {

using namespace cib;
using namespace cib::bench;

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

unsigned ceil_log2(std::uint64_t n) { return n <= 1 ? 0 : static_cast<unsigned>(std::bit_width(n - 1)); }

WorkloadSpec spec_of(WorkloadKind kind, std::uint64_t n, Scheme scheme, std::uint64_t seed = 1) {
  WorkloadSpec s;
  s.kind = kind;
  s.n_files = n;
  s.scheme = scheme;
  s.seed = seed;
  return s;
}

// 1. 100 seeds x 10^4-op mixed workloads per scheme, zero oracle mismatches.
Verdict oracle_equivalence() {
  std::uint64_t runs = 0;
  std::uint64_t mismatches = 0;
  std::string first;
  for (Scheme scheme : {Scheme::Cib, Scheme::Trad, Scheme::BTree}) {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      WorkloadSpec s = spec_of(WorkloadKind::CrashFuzz, 0, scheme, seed);
      s.ops = 10000;
      s.region_bytes = 256 << 20;
      ++runs;
      try {
        (void)run(s);
      } catch (const OracleMismatch& e) {
        if (mismatches++ == 0) first = e.what();
      }
    }
  }
  return {mismatches == 0, std::to_string(runs) + " runs, " + std::to_string(mismatches) + " mismatches" +
                               (first.empty() ? "" : " (first: " + first + ")")};
}

double best_elapsed(Scheme scheme, std::uint64_t n, int reps) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) best = std::min(best, run(spec_of(WorkloadKind::CreateN, n, scheme)).elapsed_s);
  return best;
}

// 2. trad/cib create-n elapsed ratio grows with n and reaches 10x at 10^5.
Verdict speedup_trend() {
  const std::vector<std::uint64_t> sizes = {1000, 10000, 50000, 100000};
  std::vector<double> ratios;
  std::ostringstream detail;
  for (std::uint64_t n : sizes) {
    const int reps = n >= 50000 ? 2 : 5;
    const double trad = best_elapsed(Scheme::Trad, n, reps);
    const double cib = best_elapsed(Scheme::Cib, n, 5);
    ratios.push_back(trad / cib);
    detail << (ratios.size() > 1 ? ", " : "") << "n=" << n << " " << fmt(ratios.back()) << "x";
  }
  bool monotone = true;
  for (std::size_t i = 1; i < ratios.size(); ++i) monotone = monotone && ratios[i] > ratios[i - 1];
  const bool floor = ratios.back() >= 10.0;
  detail << "; monotone=" << (monotone ? "yes" : "no") << ", >=10x at 1e5=" << (floor ? "yes" : "no");
  return {monotone && floor, detail.str()};
}

// 3. Each of 10^4 deletes writes exactly 8 bytes.
Verdict delete_cost() {
  PmRegion region(256 << 20);
  CibDirectory dir = CibDirectory::format(region);
  const std::uint64_t n = 10000;
  for (std::uint64_t i = 0; i < n; ++i) dir.create(file_name("file{n}", i), i + 1);
  std::uint64_t off = 0;
  std::uint64_t lo = ~0ULL, hi = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const WriteStats before = region.stats();
    dir.remove(file_name("file{n}", (i * 7919) % n));
    const std::uint64_t b = (region.stats() - before).bytes_written;
    lo = std::min(lo, b);
    hi = std::max(hi, b);
    off += b != 8;
  }
  return {off == 0 && dir.readdir().empty(),
          std::to_string(n) + " deletes, bytes/delete in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"};
}

// 4. btree/cib pm bytes at n = 10^5: >= 10 with shadowing, >= 3 without.
Verdict write_reduction() {
  const std::uint64_t n = 100000;
  const RunReport cib = run(spec_of(WorkloadKind::CreateN, n, Scheme::Cib));
  const RunReport shadow = run(spec_of(WorkloadKind::CreateN, n, Scheme::BTree));
  WorkloadSpec s = spec_of(WorkloadKind::CreateN, n, Scheme::BTree);
  s.btree_shadow = false;
  const RunReport in_place = run(s);
  const double r1 = static_cast<double>(shadow.pm_bytes) / static_cast<double>(cib.pm_bytes);
  const double r2 = static_cast<double>(in_place.pm_bytes) / static_cast<double>(cib.pm_bytes);
  return {r1 >= 10.0 && r2 >= 3.0, "cib " + std::to_string(cib.pm_bytes) + " B; shadowed btree " + fmt(r1) +
                                       "x (need >=10); in-place btree " + fmt(r2) + "x (need >=3)"};
}

// 5. At 10^6 inserts, cib is faster than the (shadowed) B+-tree.
Verdict timing_direction() {
  const std::uint64_t n = 1000000;
  double cib = 1e300, btree = 1e300;
  for (int i = 0; i < 2; ++i) {
    cib = std::min(cib, run(spec_of(WorkloadKind::CreateN, n, Scheme::Cib)).elapsed_s);
    btree = std::min(btree, run(spec_of(WorkloadKind::CreateN, n, Scheme::BTree)).elapsed_s);
  }
  return {cib < btree, "cib " + fmt(cib, 3) + " s, btree " + fmt(btree, 3) + " s (" + fmt(btree / cib) + "x)"};
}

// 6. Lookups over a 10^5-file directory probe at most ceil(log2 blocks) + 1 blocks.
Verdict probe_bound() {
  const std::uint64_t n = 100000;
  PmRegion region(256 << 20);
  CibDirectory dir = CibDirectory::format(region);
  for (std::uint64_t i = 0; i < n; ++i) dir.create(file_name("file{n}", i), i + 1);
  dir.build_array();
  dir.probes().reset();
  std::uint64_t wrong = 0;
  for (std::uint64_t i = 0; i < n; ++i) wrong += dir.find(file_name("file{n}", i)) != std::optional<InodeNo>(i + 1);
  for (std::uint64_t i = 0; i < n / 10; ++i) wrong += dir.find(file_name("absent{n}", i)).has_value();
  const auto hist = dir.probes().histogram();
  std::uint64_t max_bucket = 0;
  for (std::uint64_t b = 0; b < hist.size(); ++b) {
    if (hist[b]) max_bucket = b;
  }
  const std::uint64_t bound = ceil_log2(dir.block_count()) + 1;
  return {wrong == 0 && max_bucket <= bound && max_bucket + 1 < ProbeStats::kBuckets,
          std::to_string(dir.probes().lookups()) + " lookups over " + std::to_string(dir.block_count()) +
              " blocks, max probes " + std::to_string(max_bucket) + " (bound " + std::to_string(bound) + ")"};
}

// 7. Crash fuzzing: exhaustive over 169 creates, 1000 sampled points of a 10^4-op mix.
Verdict crash_safety() {
  WorkloadSpec small = spec_of(WorkloadKind::CreateN, 169, Scheme::Cib);
  small.region_bytes = 8 << 20;
  const CrashFuzzReport a = crash_fuzz(small, ~0ULL);
  WorkloadSpec mixed = spec_of(WorkloadKind::CrashFuzz, 0, Scheme::Cib);
  mixed.ops = 10000;
  mixed.region_bytes = 64 << 20;
  const CrashFuzzReport b = crash_fuzz(mixed, 1000);
  std::ostringstream d;
  d << "169 creates: " << a.points_tested << "/" << a.total_points << " points" << (a.exhaustive ? " (exhaustive)" : "")
    << ", " << a.failures.size() << " failures; 10^4-op mix: " << b.points_tested << " of " << b.total_points
    << " points, " << b.failures.size() << " failures";
  if (!a.failures.empty()) d << "; first: " << a.failures.front().what;
  if (!b.failures.empty()) d << "; first: " << b.failures.front().what;
  const bool pass = a.exhaustive && a.points_tested == a.total_points && a.failures.empty() &&
                    b.points_tested == 1000 && b.failures.empty() && a.final_recover_clean && b.final_recover_clean;
  return {pass, d.str()};
}

// 8. 10^4 opens and 10^4 readdirs leave the write stats untouched.
Verdict lookup_purity() {
  PmRegion region(64 << 20);
  CibDirectory dir = CibDirectory::format(region);
  for (std::uint64_t i = 0; i < 1000; ++i) dir.create(file_name("file{n}", i), i + 1);
  const WriteStats before = region.stats();
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  for (std::uint64_t i = 0; i < 10000; ++i) {
    try {
      (void)dir.open(file_name("file{n}", i % 2000));
      ++hits;
    } catch (const Error&) {
      ++misses;
    }
  }
  std::uint64_t listed = 0;
  for (int i = 0; i < 10000; ++i) listed += dir.readdir().size();
  const WriteStats delta = region.stats() - before;
  return {delta == WriteStats{} && hits == 5000 && listed == 10000ULL * 1000,
          "delta bytes=" + std::to_string(delta.bytes_written) + " words=" + std::to_string(delta.words_written) +
              " barriers=" + std::to_string(delta.barriers)};
}

// 9. An image written by one process resolves every name in a fresh process.
Verdict layout_stability() {
#ifndef CIB_BENCH_EXE
  return {false, "bench executable not built"};
#else
  const auto path = std::filesystem::temp_directory_path() / ("cib_accept_" + std::to_string(::getpid()) + ".img");
  const std::string exe = CIB_BENCH_EXE;
  const std::string w = "\"" + exe + "\" write-image --n 100000 --seed 1 --out \"" + path.string() + "\" > /dev/null";
  const std::string v = "\"" + exe + "\" verify-image --n 100000 --seed 1 --image \"" + path.string() + "\"";
  const int wrc = std::system(w.c_str());
  std::string out;
  int vrc = -1;
  if (wrc == 0) {
    if (FILE* p = ::popen(v.c_str(), "r")) {
      char buf[256];
      while (std::fgets(buf, sizeof buf, p)) out += buf;
      vrc = ::pclose(p);
    }
  }
  const auto size = std::filesystem::exists(path) ? std::filesystem::file_size(path) : 0;
  std::filesystem::remove(path);
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return {wrc == 0 && vrc == 0, "image " + std::to_string(size) + " bytes; verifier: " + (out.empty() ? "no output" : out)};
#endif
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"oracle equivalence", oracle_equivalence}, {"speedup trend", speedup_trend},
      {"delete write cost", delete_cost},         {"pm write reduction", write_reduction},
      {"btree timing direction", timing_direction}, {"probe bound", probe_bound},
      {"crash safety", crash_safety},             {"lookup purity", lookup_purity},
      {"layout stability", layout_stability},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::cout << "criterion " << i + 1 << " " << (v.pass ? "PASS" : "FAIL") << " [" << criteria[i].first << "] "
              << v.detail << " (" << fmt(secs, 1) << " s)" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
