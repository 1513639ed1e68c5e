#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cib/bench.hpp"
#include "cib/btree_index.hpp"
#include "cib/cib_index.hpp"
#include "cib/trad_dir.hpp"

namespace py = pybind11;
using namespace cib;

namespace {

template <class Dir, class Cls>
void bind_directory_ops(Cls& cls) {
  cls.def("find", &Dir::find, py::arg("name"))
      .def("open", &Dir::open, py::arg("name"))
      .def("create", static_cast<void (Dir::*)(std::string_view, InodeNo)>(&Dir::create), py::arg("name"), py::arg("inode_no"))
      .def("remove", &Dir::remove, py::arg("name"))
      .def("readdir",
           [](const Dir& d) {
             py::list out;
             for (const auto& e : d.readdir()) out.append(py::make_tuple(py::bytes(e.name), e.inode_no));
             return out;
           })
      .def_property_readonly("inode_area", &Dir::inode_area)
      .def_property_readonly("aux_bytes", &Dir::aux_bytes)
      .def_property_readonly("max_probes", [](const Dir& d) { return d.probes().max(); })
      .def_property_readonly("last_probes", [](const Dir& d) { return d.probes().last(); });
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Content-indexed directories over simulated persistent memory";

  static py::exception<Error> cib_error(m, "CibError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(cib_error, e.what());
    } catch (const bench::OracleMismatch& e) {
      py::set_error(PyExc_AssertionError, e.what());
    }
  });

  m.def("hash_name", [](const std::string& name) { return hash_name(name); }, py::arg("name"));

  py::class_<WriteStats>(m, "WriteStats")
      .def_readonly("bytes_written", &WriteStats::bytes_written)
      .def_readonly("words_written", &WriteStats::words_written)
      .def_readonly("barriers", &WriteStats::barriers)
      .def("__repr__", [](const WriteStats& s) {
        return "WriteStats(bytes_written=" + std::to_string(s.bytes_written) +
               ", words_written=" + std::to_string(s.words_written) + ", barriers=" + std::to_string(s.barriers) + ")";
      });

  py::class_<PmRegion>(m, "PmRegion")
      .def(py::init<std::uint64_t>(), py::arg("capacity") = 64ULL << 20)
      .def_static("load", &PmRegion::load, py::arg("path"))
      .def("dump", &PmRegion::dump, py::arg("path"))
      .def_property_readonly("capacity", &PmRegion::capacity)
      .def_property_readonly("stats", &PmRegion::stats)
      .def_property_readonly("high_water", &PmRegion::high_water)
      .def("read_u64", &PmRegion::read_u64, py::arg("offset"))
      .def("write_bytes",
           [](PmRegion& r, Offset off, const py::bytes& data) {
             const std::string s = data;
             r.write_bytes(off, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
           },
           py::arg("offset"), py::arg("data"))
      .def("write_atomic64", &PmRegion::write_atomic64, py::arg("offset"), py::arg("value"))
      .def("persist_barrier", &PmRegion::persist_barrier)
      .def("alloc_block", &PmRegion::alloc_block)
      .def("free_block", &PmRegion::free_block, py::arg("offset"))
      .def("alloc_name_bytes", &PmRegion::alloc_name_bytes, py::arg("n"));

  auto cib_dir = py::class_<CibDirectory>(m, "CibDirectory")
      .def_static("format", py::overload_cast<PmRegion&, std::uint64_t>(&CibDirectory::format), py::arg("region"),
                  py::arg("accel_threshold") = CibDirectory::kDefaultAccelThreshold, py::keep_alive<0, 1>())
      .def_static("attach", &CibDirectory::attach, py::arg("region"), py::arg("inode_area"), py::keep_alive<0, 1>())
      .def_property_readonly("block_count", &CibDirectory::block_count)
      .def_property_readonly("array_ptr", &CibDirectory::array_ptr)
      .def("locate_block", [](const CibDirectory& d, HashKey key) { return d.locate_block(key); }, py::arg("key"))
      .def("build_array", &CibDirectory::build_array)
      .def("recover", [](CibDirectory& d) { return d.recover().actions; })
      .def("check", &CibDirectory::check)
      .def("blocks", &CibDirectory::blocks);
  bind_directory_ops<CibDirectory>(cib_dir);

  auto trad_dir = py::class_<TradDirectory>(m, "TradDirectory")
      .def_static("format", &TradDirectory::format, py::arg("region"), py::keep_alive<0, 1>())
      .def("check", &TradDirectory::check);
  bind_directory_ops<TradDirectory>(trad_dir);

  auto bt_dir = py::class_<BTreeDirectory>(m, "BTreeDirectory")
      .def_static("format",
                  [](PmRegion& r, bool shadow) { return BTreeDirectory::format(r, {.shadow = shadow}); },
                  py::arg("region"), py::arg("shadow") = true, py::keep_alive<0, 1>())
      .def_property_readonly("height", &BTreeDirectory::height)
      .def("validate", &BTreeDirectory::validate, py::arg("check_occupancy") = false);
  bind_directory_ops<BTreeDirectory>(bt_dir);

  py::class_<bench::WorkloadSpec>(m, "WorkloadSpec")
      .def(py::init([](const std::string& workload, std::uint64_t n, std::uint64_t seed, const std::string& scheme,
                       std::uint64_t ops, bool btree_shadow, std::uint64_t region_bytes) {
             bench::WorkloadSpec s;
             auto k = bench::parse_workload(workload);
             auto sc = bench::parse_scheme(scheme);
             if (!k) throw py::value_error("unknown workload " + workload);
             if (!sc) throw py::value_error("unknown scheme " + scheme);
             s.kind = *k;
             s.scheme = *sc;
             s.n_files = n;
             s.seed = seed;
             s.ops = ops;
             s.btree_shadow = btree_shadow;
             s.region_bytes = region_bytes;
             return s;
           }),
           py::arg("workload") = "create-n", py::arg("n") = 1000, py::arg("seed") = 1, py::arg("scheme") = "cib",
           py::arg("ops") = 0, py::arg("btree_shadow") = true, py::arg("region_bytes") = 256ULL << 20)
      .def_readwrite("n_files", &bench::WorkloadSpec::n_files)
      .def_readwrite("seed", &bench::WorkloadSpec::seed);

  py::class_<bench::RunReport>(m, "RunReport")
      .def_property_readonly("scheme", [](const bench::RunReport& r) { return std::string(bench::to_string(r.scheme)); })
      .def_property_readonly("workload", [](const bench::RunReport& r) { return std::string(bench::to_string(r.workload)); })
      .def_readonly("n", &bench::RunReport::n)
      .def_readonly("ops", &bench::RunReport::ops)
      .def_readonly("elapsed_s", &bench::RunReport::elapsed_s)
      .def_readonly("pm_bytes", &bench::RunReport::pm_bytes)
      .def_readonly("pm_words", &bench::RunReport::pm_words)
      .def_readonly("barriers", &bench::RunReport::barriers)
      .def_readonly("max_probes", &bench::RunReport::max_probes)
      .def_readonly("probe_histogram", &bench::RunReport::probe_histogram)
      .def_readonly("peak_aux_bytes", &bench::RunReport::peak_aux_bytes);

  py::class_<bench::CrashFuzzReport>(m, "CrashFuzzReport")
      .def_readonly("total_points", &bench::CrashFuzzReport::total_points)
      .def_readonly("points_tested", &bench::CrashFuzzReport::points_tested)
      .def_readonly("exhaustive", &bench::CrashFuzzReport::exhaustive)
      .def_readonly("final_recover_clean", &bench::CrashFuzzReport::final_recover_clean)
      .def_property_readonly("failures", [](const bench::CrashFuzzReport& r) {
        std::vector<std::pair<std::uint64_t, std::string>> out;
        for (const auto& f : r.failures) out.emplace_back(f.barrier, f.what);
        return out;
      });

  m.def("run", &bench::run, py::arg("spec"), py::call_guard<py::gil_scoped_release>());
  m.def("crash_fuzz", &bench::crash_fuzz, py::arg("spec"), py::arg("max_points") = 1000,
        py::call_guard<py::gil_scoped_release>());
  m.def("report_emit",
        [](const std::vector<bench::RunReport>& reports, const std::string& format) {
          if (format != "csv" && format != "table") throw py::value_error("format must be csv or table");
          return bench::report_emit(reports, format == "csv" ? bench::Format::Csv : bench::Format::Table);
        },
        py::arg("reports"), py::arg("format") = "csv");
}
