#include "cib/directory.hpp"

#include <algorithm>

namespace cib {

void ProbeStats::record(std::uint64_t probes) noexcept {
  buckets_[std::min<std::uint64_t>(probes, kBuckets - 1)].fetch_add(1, std::memory_order_relaxed);
  last_.store(probes, std::memory_order_relaxed);
  lookups_.fetch_add(1, std::memory_order_relaxed);
  std::uint64_t cur = max_.load(std::memory_order_relaxed);
  while (probes > cur && !max_.compare_exchange_weak(cur, probes, std::memory_order_relaxed)) {
  }
}

void ProbeStats::reset() noexcept {
  for (auto& b : buckets_) b.store(0, std::memory_order_relaxed);
  last_.store(0, std::memory_order_relaxed);
  max_.store(0, std::memory_order_relaxed);
  lookups_.store(0, std::memory_order_relaxed);
}

std::vector<std::uint64_t> ProbeStats::histogram() const {
  std::vector<std::uint64_t> out(kBuckets);
  for (std::size_t i = 0; i < kBuckets; ++i) out[i] = buckets_[i].load(std::memory_order_relaxed);
  while (!out.empty() && out.back() == 0) out.pop_back();
  return out;
}

DirKind read_dir_kind(const PmRegion& region, Offset inode_area) {
  const std::uint64_t tag = region.read_u64(inode_area + kInodeKindOff);
  switch (static_cast<DirKind>(tag)) {
    case DirKind::Cib:
    case DirKind::Trad:
    case DirKind::BTree:
      return static_cast<DirKind>(tag);
  }
  throw Error(Errc::CorruptLayout, "unknown directory kind tag");
}

}  // namespace cib
