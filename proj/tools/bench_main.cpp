// bench: directory-scheme benchmark and verification driver.
//
//   bench run --scheme cib --workload create-n --n 100000 --seed 1 --format table
//   bench crash-fuzz --n 10000 --seed 1 --max-points 1000
//   bench sweep --workload create-n --schemes all
//   bench write-image --n 100000 --seed 1 --out dir.img
//   bench verify-image --image dir.img --n 100000 --seed 1

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cib/bench.hpp"
#include "cib/cib_index.hpp"

namespace {

using namespace cib;
using namespace cib::bench;

WorkloadKind workload_or_die(const std::string& s) {
  if (auto k = parse_workload(s)) return *k;
  throw CLI::ValidationError("--workload", "unknown workload '" + s + "'");
}

Scheme scheme_or_die(const std::string& s) {
  if (auto k = parse_scheme(s)) return *k;
  throw CLI::ValidationError("--scheme", "unknown scheme '" + s + "'");
}

Format format_or_die(const std::string& s) {
  if (s == "csv") return Format::Csv;
  if (s == "table") return Format::Table;
  throw CLI::ValidationError("--format", "expected csv or table");
}

std::vector<std::uint64_t> parse_sizes(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) out.push_back(std::stoull(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Directory index benchmark and crash-consistency driver"};
  app.require_subcommand(1);

  WorkloadSpec spec;
  std::string scheme = "cib";
  std::string workload = "create-n";
  std::string format = "table";
  bool no_shadow = false;

  auto* run_cmd = app.add_subcommand("run", "Run one workload against one scheme");
  run_cmd->add_option("--scheme", scheme, "cib | trad | btree");
  run_cmd->add_option("--workload", workload, "create-n | lookup-n | delete-n | mixed-webproxy | mixed-varmail | crash-fuzz");
  run_cmd->add_option("--n", spec.n_files, "Number of files");
  run_cmd->add_option("--ops", spec.ops, "Op count for crash-fuzz mixes");
  run_cmd->add_option("--seed", spec.seed, "Workload seed");
  run_cmd->add_option("--pattern", spec.name_pattern, "Filename template; {n} is the file index");
  run_cmd->add_option("--format", format, "csv | table");
  run_cmd->add_flag("--no-shadow", no_shadow, "Update B+-tree nodes in place");

  std::uint64_t max_points = 1000;
  std::string fuzz_workload = "crash-fuzz";
  auto* fuzz_cmd = app.add_subcommand("crash-fuzz", "Crash at persist barriers and verify recovery");
  fuzz_cmd->add_option("--n", spec.n_files, "Op count (crash-fuzz) or file count (other workloads)");
  fuzz_cmd->add_option("--seed", spec.seed, "Workload seed");
  fuzz_cmd->add_option("--max-points", max_points, "Sample this many crash points when there are more");
  fuzz_cmd->add_option("--workload", fuzz_workload, "Workload to replay");

  std::string schemes = "all";
  std::string sizes = "1000,10000,50000,100000";
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a workload over a size sweep for several schemes");
  sweep_cmd->add_option("--workload", workload, "Workload kind");
  sweep_cmd->add_option("--schemes", schemes, "all or a comma list");
  sweep_cmd->add_option("--sizes", sizes, "Comma-separated file counts");
  sweep_cmd->add_option("--seed", spec.seed, "Workload seed");
  sweep_cmd->add_option("--format", format, "csv | table");
  sweep_cmd->add_flag("--no-shadow", no_shadow, "Update B+-tree nodes in place");

  std::string image_path;
  auto* write_cmd = app.add_subcommand("write-image", "Create n files in a CIB directory and dump the region");
  write_cmd->add_option("--n", spec.n_files, "Number of files");
  write_cmd->add_option("--seed", spec.seed, "Workload seed");
  write_cmd->add_option("--out", image_path, "Image path")->required();

  auto* verify_cmd = app.add_subcommand("verify-image", "Reopen a dumped region and resolve every name");
  verify_cmd->add_option("--n", spec.n_files, "Number of files written");
  verify_cmd->add_option("--seed", spec.seed, "Workload seed");
  verify_cmd->add_option("--image", image_path, "Image path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    spec.btree_shadow = !no_shadow;
    if (*run_cmd) {
      spec.scheme = scheme_or_die(scheme);
      spec.kind = workload_or_die(workload);
      const RunReport r = run(spec);
      std::cout << report_emit(r, format_or_die(format));
      return 0;
    }

    if (*fuzz_cmd) {
      spec.kind = workload_or_die(fuzz_workload);
      if (spec.kind == WorkloadKind::CrashFuzz) spec.ops = spec.n_files;
      const CrashFuzzReport r = crash_fuzz(spec, max_points);
      std::cout << "crash points: " << r.total_points << ", tested: " << r.points_tested
                << (r.exhaustive ? " (exhaustive)" : " (sampled)") << ", recoveries with repairs: "
                << r.recoveries_with_actions << ", failures: " << r.failures.size()
                << ", clean final recover: " << (r.final_recover_clean ? "yes" : "no") << '\n';
      for (const auto& f : r.failures) std::cout << "  barrier " << f.barrier << ": " << f.what << '\n';
      return r.failures.empty() && r.final_recover_clean ? 0 : 1;
    }

    if (*sweep_cmd) {
      spec.kind = workload_or_die(workload);
      std::vector<Scheme> list;
      if (schemes == "all") {
        list = {Scheme::Trad, Scheme::Cib, Scheme::BTree};
      } else {
        std::stringstream in(schemes);
        for (std::string tok; std::getline(in, tok, ',');) list.push_back(scheme_or_die(tok));
      }
      std::vector<RunReport> reports;
      for (std::uint64_t n : parse_sizes(sizes)) {
        for (Scheme s : list) {
          spec.scheme = s;
          spec.n_files = n;
          reports.push_back(run(spec));
          std::cerr << to_string(s) << " n=" << n << " done in " << reports.back().elapsed_s << " s\n";
        }
      }
      std::cout << report_emit(reports, format_or_die(format));
      return 0;
    }

    if (*write_cmd) {
      spec.kind = WorkloadKind::CreateN;
      const Workload w = gen_workload(spec);
      PmRegion region(default_region_capacity());
      CibDirectory dir = CibDirectory::format(region);
      run_on(region, dir, spec, w);
      region.dump(image_path);
      std::cout << "wrote " << region.high_water() << " bytes, " << dir.block_count() << " blocks, directory at inode "
                << dir.inode_area() << '\n';
      return 0;
    }

    if (*verify_cmd) {
      spec.kind = WorkloadKind::CreateN;
      const Workload w = gen_workload(spec);
      PmRegion region = PmRegion::load(image_path);
      CibDirectory dir = CibDirectory::attach(region, PmRegion::kInodeTable);
      if (auto bad = dir.check(); !bad.empty()) {
        for (const auto& b : bad) std::cerr << "invariant: " << b << '\n';
        return 1;
      }
      std::uint64_t wrong = 0;
      for (std::size_t i = 0; i < w.names.size(); ++i) {
        if (dir.find(w.names[i]) != std::optional<InodeNo>(i + 1)) ++wrong;
      }
      if (region.stats().bytes_written != 0) {
        std::cerr << "lookups wrote to the region\n";
        return 1;
      }
      std::cout << "resolved " << w.names.size() - wrong << " of " << w.names.size() << " names\n";
      return wrong == 0 ? 0 : 1;
    }
  } catch (const OracleMismatch& e) {
    std::cerr << "oracle mismatch: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
