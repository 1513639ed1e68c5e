#pragma once

// Workload generation, benchmark runs with an inline oracle, and the
// barrier-level crash fuzzer.
//
// Op mixes (the Filebench personalities are approximated, not embedded):
//   create-n        n creates
//   lookup-n        n creates, then n opens of a permutation of the names
//   delete-n        n creates, then n deletes of a permutation of the names
//   mixed-webproxy  per file i, 12 ops: create i, 5 opens of i, 5 opens of
//                   uniformly random files (absent ones are expected misses),
//                   1 delete. The delete in step i removes file i - W with
//                   W = max(1, n / 4); the last W files are deleted at the end.
//   mixed-varmail   create+open every file; then, in shuffled order, delete
//                   each file and re-create+open the even-numbered ones;
//                   finally delete the re-created files. Creates, opens and
//                   deletes come out 1:1:1.
//   crash-fuzz      `ops` random ops over a pool of max(1, ops / 2) names:
//                   50% create, 30% open, 20% delete.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cib/directory.hpp"

namespace cib::bench {

enum class Scheme { Cib, Trad, BTree };
enum class WorkloadKind { CreateN, LookupN, DeleteN, MixedWebproxy, MixedVarmail, CrashFuzz };
enum class Format { Csv, Table };

std::string_view to_string(Scheme s);
std::string_view to_string(WorkloadKind k);
std::optional<Scheme> parse_scheme(std::string_view s);
std::optional<WorkloadKind> parse_workload(std::string_view s);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::CreateN;
  std::uint64_t n_files = 1000;
  std::uint64_t ops = 0;  // crash-fuzz only
  std::string name_pattern = "file{n}";  // "{n}" is replaced by the file index
  std::uint64_t seed = 1;
  Scheme scheme = Scheme::Cib;
  bool btree_shadow = true;
  std::uint64_t region_bytes = 0;  // 0 = default_region_capacity()
};

enum class OpKind : std::uint8_t { Create, Open, Delete };

struct Op {
  OpKind kind;
  std::uint32_t file;  // index into Workload::names
  InodeNo inode_no;    // creates only
  friend bool operator==(const Op&, const Op&) = default;
};

struct Workload {
  std::vector<std::string> names;
  std::vector<Op> ops;
};

std::string file_name(std::string_view pattern, std::uint64_t index);
Workload gen_workload(const WorkloadSpec& spec);

enum class Outcome : std::uint8_t { Ok, NotFound, AlreadyExists };

/// Expected result of every op, computed by replaying the workload against a
/// hash map. `inode` holds the expected inode for successful opens.
struct Expectation {
  Outcome outcome;
  InodeNo inode;
};
std::vector<Expectation> oracle_outcomes(const Workload& w);

std::unique_ptr<Directory> make_directory(PmRegion& region, Scheme scheme, bool btree_shadow = true);
std::unique_ptr<Directory> attach_directory(PmRegion& region, Offset inode_area);

/// Runs one op and reports what the directory said.
Expectation apply(Directory& dir, const Workload& w, const Op& op);

struct RunReport {
  Scheme scheme = Scheme::Cib;
  WorkloadKind workload = WorkloadKind::CreateN;
  std::uint64_t n = 0;
  std::uint64_t ops = 0;
  double elapsed_s = 0;
  std::uint64_t pm_bytes = 0;
  std::uint64_t pm_words = 0;
  std::uint64_t barriers = 0;
  std::uint64_t max_probes = 0;
  std::vector<std::uint64_t> probe_histogram;
  std::uint64_t peak_aux_bytes = 0;
  std::uint64_t mismatches = 0;
};

/// Thrown by run() on the first oracle mismatch.
class OracleMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fresh region, timed execution, every result checked against the oracle.
RunReport run(const WorkloadSpec& spec);
/// Same, against a caller-provided region and directory. Stats are deltas.
RunReport run_on(PmRegion& region, Directory& dir, const WorkloadSpec& spec, const Workload& w);

struct CrashFailure {
  std::uint64_t barrier;
  std::string what;
};

struct CrashFuzzReport {
  std::uint64_t total_points = 0;   // barriers issued by the workload
  std::uint64_t points_tested = 0;
  bool exhaustive = false;
  std::uint64_t recoveries_with_actions = 0;
  bool final_recover_clean = false;
  std::vector<CrashFailure> failures;
};

/// Replays the workload once per crash point (every barrier the workload
/// issues, or a seeded sample of `max_points` of them), recovers each
/// snapshot, and checks invariants plus every acknowledged op. CIB only.
CrashFuzzReport crash_fuzz(const WorkloadSpec& spec, std::uint64_t max_points = 1000);

std::string report_emit(const std::vector<RunReport>& reports, Format format);
inline std::string report_emit(const RunReport& report, Format format) {
  return report_emit(std::vector<RunReport>{report}, format);
}

inline constexpr std::string_view kReportColumns =
    "scheme,workload,n,ops,elapsed_s,pm_bytes,pm_words,barriers,max_probes";

}  // namespace cib::bench
