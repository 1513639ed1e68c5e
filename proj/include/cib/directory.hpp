#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cib/dentry.hpp"
#include "cib/pm_region.hpp"

namespace cib {

struct DirEntry {
  std::string name;
  InodeNo inode_no = 0;

  friend bool operator==(const DirEntry&, const DirEntry&) = default;
  friend auto operator<=>(const DirEntry&, const DirEntry&) = default;
};

/// Per-lookup probe counts. What a "probe" is depends on the scheme: blocks
/// inspected for CIB, records visited for the sequential directory, nodes
/// visited for the B+-tree.
class ProbeStats {
 public:
  static constexpr std::size_t kBuckets = 65;  // last bucket collects >= 64

  void record(std::uint64_t probes) noexcept;
  void reset() noexcept;

  std::uint64_t last() const noexcept { return last_.load(std::memory_order_relaxed); }
  std::uint64_t max() const noexcept { return max_.load(std::memory_order_relaxed); }
  std::uint64_t lookups() const noexcept { return lookups_.load(std::memory_order_relaxed); }
  std::vector<std::uint64_t> histogram() const;

 private:
  std::array<std::atomic<std::uint64_t>, kBuckets> buckets_{};
  std::atomic<std::uint64_t> last_{0};
  std::atomic<std::uint64_t> max_{0};
  std::atomic<std::uint64_t> lookups_{0};
};

/// Common surface of the three directory schemes. A directory is a view over
/// a PmRegion plus the offset of its 64-byte inode area; all persistent state
/// lives in the region.
class Directory {
 public:
  virtual ~Directory() = default;

  virtual std::optional<InodeNo> find(std::string_view name) const = 0;
  /// Throws AlreadyExists if the name is present.
  virtual void create(std::string_view name, InodeNo inode_no) = 0;
  /// Throws NotFound if the name is absent.
  virtual void remove(std::string_view name) = 0;
  virtual std::vector<DirEntry> readdir() const = 0;
  /// Bytes of index structure kept beside the dentries themselves.
  virtual std::uint64_t aux_bytes() const = 0;

  InodeNo open(std::string_view name) const {
    if (auto ino = find(name)) return *ino;
    throw Error(Errc::NotFound, std::string(name));
  }

  Offset inode_area() const noexcept { return inode_area_; }
  const ProbeStats& probes() const noexcept { return *probes_; }
  ProbeStats& probes() noexcept { return *probes_; }

 protected:
  Directory(PmRegion& region, Offset inode_area)
      : region_(&region), inode_area_(inode_area), probes_(std::make_unique<ProbeStats>()) {}
  Directory(Directory&&) noexcept = default;
  Directory& operator=(Directory&&) noexcept = default;

  PmRegion* region_;
  Offset inode_area_;
  std::unique_ptr<ProbeStats> probes_;
};

/// Kind tags stored at byte 40 of a directory inode area.
enum class DirKind : std::uint64_t { Cib = 0x31424943, Trad = 0x31444154, BTree = 0x31455242 };
inline constexpr Offset kInodeKindOff = 40;

/// Reads the kind tag of an inode area; throws CorruptLayout on an unknown tag.
DirKind read_dir_kind(const PmRegion& region, Offset inode_area);

}  // namespace cib
