"""Content-indexed directories over simulated persistent memory."""

from ._core import (
    BTreeDirectory,
    CibDirectory,
    CibError,
    CrashFuzzReport,
    PmRegion,
    RunReport,
    TradDirectory,
    WorkloadSpec,
    WriteStats,
    crash_fuzz,
    hash_name,
    report_emit,
    run,
)

__all__ = [
    "BTreeDirectory",
    "CibDirectory",
    "CibError",
    "CrashFuzzReport",
    "PmRegion",
    "RunReport",
    "TradDirectory",
    "WorkloadSpec",
    "WriteStats",
    "crash_fuzz",
    "hash_name",
    "report_emit",
    "run",
]
