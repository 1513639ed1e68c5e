#include "cib/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "cib/btree_index.hpp"
#include "cib/cib_index.hpp"
#include "cib/trad_dir.hpp"

namespace cib::bench {

namespace {

// std::shuffle and the std distributions are implementation-defined; these
// keep op sequences identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t below(std::uint64_t bound) { return engine_() % bound; }
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

std::vector<std::uint32_t> iota_perm(std::uint64_t n, Rng& rng) {
  std::vector<std::uint32_t> p(n);
  for (std::uint32_t i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p);
  return p;
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Ok: return "ok";
    case Outcome::NotFound: return "NotFound";
    case Outcome::AlreadyExists: return "AlreadyExists";
  }
  return "?";
}

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Create: return "create";
    case OpKind::Open: return "open";
    case OpKind::Delete: return "delete";
  }
  return "?";
}

std::uint64_t capacity_for(const WorkloadSpec& spec) {
  return spec.region_bytes ? round_up(spec.region_bytes, PmRegion::kBlockSize) : default_region_capacity();
}

}  // namespace

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Cib: return "cib";
    case Scheme::Trad: return "trad";
    case Scheme::BTree: return "btree";
  }
  return "?";
}

std::string_view to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::CreateN: return "create-n";
    case WorkloadKind::LookupN: return "lookup-n";
    case WorkloadKind::DeleteN: return "delete-n";
    case WorkloadKind::MixedWebproxy: return "mixed-webproxy";
    case WorkloadKind::MixedVarmail: return "mixed-varmail";
    case WorkloadKind::CrashFuzz: return "crash-fuzz";
  }
  return "?";
}

std::optional<Scheme> parse_scheme(std::string_view s) {
  for (Scheme v : {Scheme::Cib, Scheme::Trad, Scheme::BTree}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<WorkloadKind> parse_workload(std::string_view s) {
  for (WorkloadKind v : {WorkloadKind::CreateN, WorkloadKind::LookupN, WorkloadKind::DeleteN,
                         WorkloadKind::MixedWebproxy, WorkloadKind::MixedVarmail, WorkloadKind::CrashFuzz}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::string file_name(std::string_view pattern, std::uint64_t index) {
  std::string out(pattern);
  const std::string num = std::to_string(index);
  for (std::size_t at = out.find("{n}"); at != std::string::npos; at = out.find("{n}", at + num.size())) {
    out.replace(at, 3, num);
  }
  return out;
}

Workload gen_workload(const WorkloadSpec& spec) {
  Workload w;
  Rng rng(spec.seed);
  const std::uint64_t n = spec.n_files;
  const std::uint64_t pool = spec.kind == WorkloadKind::CrashFuzz
                                 ? std::max<std::uint64_t>(1, (spec.ops ? spec.ops : n) / 2)
                                 : n;
  w.names.reserve(pool);
  for (std::uint64_t i = 0; i < pool; ++i) w.names.push_back(file_name(spec.name_pattern, i));

  auto create = [&](std::uint32_t f, InodeNo ino) { w.ops.push_back({OpKind::Create, f, ino}); };
  auto open = [&](std::uint32_t f) { w.ops.push_back({OpKind::Open, f, 0}); };
  auto del = [&](std::uint32_t f) { w.ops.push_back({OpKind::Delete, f, 0}); };
  auto load = [&] {
    for (std::uint32_t i = 0; i < n; ++i) create(i, i + 1);
  };

  switch (spec.kind) {
    case WorkloadKind::CreateN:
      load();
      break;
    case WorkloadKind::LookupN:
      load();
      for (std::uint32_t f : iota_perm(n, rng)) open(f);
      break;
    case WorkloadKind::DeleteN:
      load();
      for (std::uint32_t f : iota_perm(n, rng)) del(f);
      break;
    case WorkloadKind::MixedWebproxy: {
      const std::uint64_t window = std::max<std::uint64_t>(1, n / 4);
      for (std::uint32_t i = 0; i < n; ++i) {
        create(i, i + 1);
        for (int k = 0; k < 5; ++k) open(i);
        for (int k = 0; k < 5; ++k) open(static_cast<std::uint32_t>(rng.below(n)));
        if (i >= window) del(static_cast<std::uint32_t>(i - window));
      }
      for (std::uint64_t i = n - std::min(window, n); i < n; ++i) del(static_cast<std::uint32_t>(i));
      break;
    }
    case WorkloadKind::MixedVarmail: {
      for (std::uint32_t i = 0; i < n; ++i) {
        create(i, i + 1);
        open(i);
      }
      const auto perm = iota_perm(n, rng);
      for (std::uint32_t f : perm) {
        del(f);
        if (f % 2 == 0) {
          create(f, n + f + 1);
          open(f);
        }
      }
      for (std::uint32_t f : perm) {
        if (f % 2 == 0) del(f);
      }
      break;
    }
    case WorkloadKind::CrashFuzz: {
      const std::uint64_t ops = spec.ops ? spec.ops : n;
      for (std::uint64_t i = 0; i < ops; ++i) {
        const auto f = static_cast<std::uint32_t>(rng.below(pool));
        const std::uint64_t r = rng.below(10);
        if (r < 5) {
          create(f, i + 1);
        } else if (r < 8) {
          open(f);
        } else {
          del(f);
        }
      }
      break;
    }
  }
  return w;
}

std::vector<Expectation> oracle_outcomes(const Workload& w) {
  std::unordered_map<std::uint32_t, InodeNo> live;
  std::vector<Expectation> out;
  out.reserve(w.ops.size());
  for (const Op& op : w.ops) {
    const auto it = live.find(op.file);
    switch (op.kind) {
      case OpKind::Create:
        if (it != live.end()) {
          out.push_back({Outcome::AlreadyExists, 0});
        } else {
          live.emplace(op.file, op.inode_no);
          out.push_back({Outcome::Ok, 0});
        }
        break;
      case OpKind::Open:
        out.push_back(it != live.end() ? Expectation{Outcome::Ok, it->second} : Expectation{Outcome::NotFound, 0});
        break;
      case OpKind::Delete:
        if (it != live.end()) {
          live.erase(it);
          out.push_back({Outcome::Ok, 0});
        } else {
          out.push_back({Outcome::NotFound, 0});
        }
        break;
    }
  }
  return out;
}

std::unique_ptr<Directory> make_directory(PmRegion& region, Scheme scheme, bool btree_shadow) {
  switch (scheme) {
    case Scheme::Cib: return std::make_unique<CibDirectory>(CibDirectory::format(region));
    case Scheme::Trad: return std::make_unique<TradDirectory>(TradDirectory::format(region));
    case Scheme::BTree:
      return std::make_unique<BTreeDirectory>(BTreeDirectory::format(region, {.shadow = btree_shadow}));
  }
  throw std::invalid_argument("unknown scheme");
}

std::unique_ptr<Directory> attach_directory(PmRegion& region, Offset inode_area) {
  switch (read_dir_kind(region, inode_area)) {
    case DirKind::Cib: return std::make_unique<CibDirectory>(CibDirectory::attach(region, inode_area));
    case DirKind::Trad: return std::make_unique<TradDirectory>(TradDirectory::attach(region, inode_area));
    case DirKind::BTree: return std::make_unique<BTreeDirectory>(BTreeDirectory::attach(region, inode_area));
  }
  throw Error(Errc::CorruptLayout, "unknown directory kind");
}

Expectation apply(Directory& dir, const Workload& w, const Op& op) {
  const std::string& name = w.names[op.file];
  switch (op.kind) {
    case OpKind::Create:
      try {
        dir.create(name, op.inode_no);
        return {Outcome::Ok, 0};
      } catch (const Error& e) {
        if (e.code() != Errc::AlreadyExists) throw;
        return {Outcome::AlreadyExists, 0};
      }
    case OpKind::Open:
      if (auto ino = dir.find(name)) return {Outcome::Ok, *ino};
      return {Outcome::NotFound, 0};
    case OpKind::Delete:
      try {
        dir.remove(name);
        return {Outcome::Ok, 0};
      } catch (const Error& e) {
        if (e.code() != Errc::NotFound) throw;
        return {Outcome::NotFound, 0};
      }
  }
  return {Outcome::NotFound, 0};
}

RunReport run_on(PmRegion& region, Directory& dir, const WorkloadSpec& spec, const Workload& w) {
  const std::vector<Expectation> expected = oracle_outcomes(w);
  dir.probes().reset();
  const WriteStats before = region.stats();
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < w.ops.size(); ++i) {
    const Op& op = w.ops[i];
    const Expectation got = apply(dir, w, op);
    const Expectation& want = expected[i];
    if (got.outcome != want.outcome || got.inode != want.inode) {
      std::ostringstream msg;
      msg << to_string(spec.scheme) << " op " << i << " (" << op_name(op.kind) << " '" << w.names[op.file]
          << "'): expected " << outcome_name(want.outcome) << "/" << want.inode << ", got "
          << outcome_name(got.outcome) << "/" << got.inode;
      throw OracleMismatch(msg.str());
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  const WriteStats delta = region.stats() - before;

  RunReport r;
  r.scheme = spec.scheme;
  r.workload = spec.kind;
  r.n = spec.n_files;
  r.ops = w.ops.size();
  r.elapsed_s = std::chrono::duration<double>(t1 - t0).count();
  r.pm_bytes = delta.bytes_written;
  r.pm_words = delta.words_written;
  r.barriers = delta.barriers;
  r.max_probes = dir.probes().max();
  r.probe_histogram = dir.probes().histogram();
  // Index structures never shrink, so the final size is the peak.
  r.peak_aux_bytes = dir.aux_bytes();
  return r;
}

RunReport run(const WorkloadSpec& spec) {
  const Workload w = gen_workload(spec);
  PmRegion region(capacity_for(spec));
  auto dir = make_directory(region, spec.scheme, spec.btree_shadow);
  return run_on(region, *dir, spec, w);
}

namespace {

struct Replay {
  std::unordered_map<std::uint32_t, InodeNo> acked;
  std::optional<std::size_t> in_flight;
  std::string error;
};

std::optional<InodeNo> after_op(const Op& op, std::optional<InodeNo> before) {
  switch (op.kind) {
    case OpKind::Create: return before ? before : std::optional<InodeNo>(op.inode_no);
    case OpKind::Delete: return std::nullopt;
    case OpKind::Open: return before;
  }
  return before;
}

std::vector<std::string> verify_recovered(PmRegion& image, Offset inode, const Workload& w, const Replay& rp,
                                          bool& had_actions) {
  std::vector<std::string> bad;
  CibDirectory dir = CibDirectory::attach(image, inode);
  try {
    had_actions = !dir.recover().clean();
  } catch (const Error& e) {
    return {std::string("recover failed: ") + e.what()};
  }
  for (auto& v : dir.check()) bad.push_back(std::move(v));
  if (!bad.empty()) return bad;

  const std::optional<std::uint32_t> loose =
      rp.in_flight ? std::optional<std::uint32_t>(w.ops[*rp.in_flight].file) : std::nullopt;
  for (std::uint32_t f = 0; f < w.names.size(); ++f) {
    const auto it = rp.acked.find(f);
    const std::optional<InodeNo> want = it != rp.acked.end() ? std::optional<InodeNo>(it->second) : std::nullopt;
    const std::optional<InodeNo> got = dir.find(w.names[f]);
    if (got == want) continue;
    if (loose == f && got == after_op(w.ops[*rp.in_flight], want)) continue;
    bad.push_back("'" + w.names[f] + "': expected " + (want ? std::to_string(*want) : "absent") + ", found " +
                  (got ? std::to_string(*got) : "absent"));
  }

  std::size_t listed = dir.readdir().size();
  std::size_t want_min = rp.acked.size();
  std::size_t want_max = rp.acked.size();
  if (loose) {
    const Op& op = w.ops[*rp.in_flight];
    if (op.kind == OpKind::Create && !rp.acked.count(op.file)) ++want_max;
    if (op.kind == OpKind::Delete && rp.acked.count(op.file)) --want_min;
  }
  if (listed < want_min || listed > want_max) bad.push_back("readdir returned " + std::to_string(listed) + " entries");

  // The recovered directory must keep working.
  try {
    dir.create("post-recovery-probe", 1);
    if (dir.find("post-recovery-probe") != std::optional<InodeNo>(1)) bad.push_back("post-recovery create not visible");
  } catch (const Error& e) {
    bad.push_back(std::string("post-recovery create failed: ") + e.what());
  }
  return bad;
}

}  // namespace

CrashFuzzReport crash_fuzz(const WorkloadSpec& spec, std::uint64_t max_points) {
  if (spec.scheme != Scheme::Cib) throw std::invalid_argument("crash fuzzing supports the cib scheme only");
  const Workload w = gen_workload(spec);
  const std::vector<Expectation> expected = oracle_outcomes(w);
  const std::uint64_t capacity = capacity_for(spec);
  CrashFuzzReport report;

  std::uint64_t first = 0;
  std::uint64_t last = 0;
  Offset inode = 0;
  {
    PmRegion region(capacity);
    CibDirectory dir = CibDirectory::format(region);
    inode = dir.inode_area();
    first = region.stats().barriers;
    for (const Op& op : w.ops) apply(dir, w, op);
    last = region.stats().barriers;
    PmRegion reopened = PmRegion::from_image(region.image());
    report.final_recover_clean = CibDirectory::attach(reopened, inode).recover().clean();
  }
  report.total_points = last - first;

  std::vector<std::uint64_t> points;
  if (report.total_points <= max_points) {
    report.exhaustive = true;
    for (std::uint64_t p = first; p < last; ++p) points.push_back(p);
  } else {
    Rng rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::uint64_t> all(report.total_points);
    for (std::uint64_t i = 0; i < all.size(); ++i) all[i] = first + i;
    for (std::uint64_t i = 0; i < max_points; ++i) std::swap(all[i], all[i + rng.below(all.size() - i)]);
    points.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(max_points));
    std::sort(points.begin(), points.end());
  }

  for (const std::uint64_t point : points) {
    PmRegion region(capacity);
    CibDirectory dir = CibDirectory::format(region);
    region.set_crash_plan(CrashPlan{point, true});
    Replay rp;
    bool crashed = false;
    for (std::size_t i = 0; i < w.ops.size() && !crashed; ++i) {
      const Op& op = w.ops[i];
      try {
        const Expectation got = apply(dir, w, op);
        if (got.outcome != expected[i].outcome || got.inode != expected[i].inode) {
          rp.error = "pre-crash op " + std::to_string(i) + " disagreed with the oracle";
        }
        if (got.outcome == Outcome::Ok && op.kind == OpKind::Create) rp.acked[op.file] = op.inode_no;
        if (got.outcome == Outcome::Ok && op.kind == OpKind::Delete) rp.acked.erase(op.file);
      } catch (const SimulatedCrash&) {
        rp.in_flight = i;
        crashed = true;
      }
    }
    ++report.points_tested;
    if (!crashed) {
      report.failures.push_back({point, "crash point never reached"});
      continue;
    }
    if (!rp.error.empty()) report.failures.push_back({point, rp.error});

    PmRegion image = PmRegion::from_image(region.snapshots().back().image);
    bool had_actions = false;
    for (auto& msg : verify_recovered(image, inode, w, rp, had_actions)) {
      report.failures.push_back({point, std::move(msg)});
    }
    if (had_actions) ++report.recoveries_with_actions;
  }
  return report;
}

std::string report_emit(const std::vector<RunReport>& reports, Format format) {
  std::vector<std::vector<std::string>> rows;
  {
    std::vector<std::string> header;
    std::string_view cols = kReportColumns;
    for (std::size_t at = 0; at != std::string_view::npos;) {
      const std::size_t comma = cols.find(',', at);
      header.emplace_back(cols.substr(at, comma == std::string_view::npos ? comma : comma - at));
      at = comma == std::string_view::npos ? comma : comma + 1;
    }
    rows.push_back(std::move(header));
  }
  for (const RunReport& r : reports) {
    char elapsed[32];
    std::snprintf(elapsed, sizeof elapsed, "%.6f", r.elapsed_s);
    rows.push_back({std::string(to_string(r.scheme)), std::string(to_string(r.workload)), std::to_string(r.n),
                    std::to_string(r.ops), elapsed, std::to_string(r.pm_bytes), std::to_string(r.pm_words),
                    std::to_string(r.barriers), std::to_string(r.max_probes)});
  }

  std::ostringstream out;
  if (format == Format::Csv) {
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
      out << '\n';
    }
    return out.str();
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << "  ";
      const std::size_t pad = width[c] - row[c].size();
      // Text columns left-aligned, numbers right-aligned.
      if (c < 2) {
        out << row[c] << std::string(c + 1 < row.size() ? pad : 0, ' ');
      } else {
        out << std::string(pad, ' ') << row[c];
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cib::bench
