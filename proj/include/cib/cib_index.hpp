#pragma once

// Content-indexed directory.
//
// Dentries live in 4096-byte blocks (see dir_block.hpp) linked into a list
// sorted by hash key. Block ranges partition the key space: the first block
// starts at 0, the last ends at 2^64-1, and each block's max_key + 1 is its
// successor's min_key. Once a directory outgrows `accel_threshold` blocks, a
// copy-on-write array of block offsets in list order is kept in PM so the
// covering block can be found by binary search.
//
// Inode area (64 bytes, every field 8-byte aligned):
//   0   list_head        first block
//   8   array_ptr        current block array, 0 = none
//   16  block_count
//   24  name_heap        0 = the region's shared name heap
//   32  accel_threshold
//   40  kind tag         DirKind::Cib
//
// Block array: u64 length followed by `length` u64 block offsets.

#include <cstdint>
#include <string>
#include <vector>

#include "cib/dir_block.hpp"
#include "cib/directory.hpp"

namespace cib {

struct RecoveryReport {
  std::vector<std::string> actions;
  bool clean() const noexcept { return actions.empty(); }
};

class CibDirectory final : public Directory {
 public:
  static constexpr std::uint64_t kDefaultAccelThreshold = 1;

  static constexpr Offset kListHeadOff = 0;
  static constexpr Offset kArrayPtrOff = 8;
  static constexpr Offset kBlockCountOff = 16;
  static constexpr Offset kNameHeapOff = 24;
  static constexpr Offset kAccelThresholdOff = 32;

  /// Allocates an inode area and one block covering the whole key space.
  static CibDirectory format(PmRegion& region, std::uint64_t accel_threshold = kDefaultAccelThreshold);
  /// Opens an existing directory. Does not repair; call recover() after a crash.
  static CibDirectory attach(PmRegion& region, Offset inode_area);

  Offset list_head() const { return field(kListHeadOff); }
  Offset array_ptr() const { return field(kArrayPtrOff); }
  std::uint64_t block_count() const { return field(kBlockCountOff); }
  std::uint64_t accel_threshold() const { return field(kAccelThresholdOff); }

  struct Located {
    Offset block;
    std::uint32_t probes;
  };
  /// Covering block of `key` plus the number of block headers inspected.
  /// Walks the list while the directory is small or has no array, otherwise
  /// binary-searches the array.
  Located locate(HashKey key) const;
  /// locate() that also records the probe count.
  Offset locate_block(HashKey key) const;

  std::optional<InodeNo> find(std::string_view name) const override;
  void create(std::string_view name, InodeNo inode_no) override;
  void remove(std::string_view name) override;
  std::vector<DirEntry> readdir() const override;
  std::uint64_t aux_bytes() const override;

  /// Rebuilds the block array from the list (copy-on-write, atomic pointer swap).
  void build_array();
  /// Splits `block` at the upper-median distinct key, copying the upper half
  /// into a new block linked right after it. Throws UnsplittableBlock when
  /// every live dentry shares one hash key.
  void split_block(Offset block);

  /// Repairs an interrupted split and a stale array or block count using only
  /// on-PM state. Throws CorruptLayout when the range partition is unrecoverable.
  RecoveryReport recover();

  /// Block offsets in list order.
  std::vector<Offset> blocks() const;
  /// Contents of the current block array (empty if none).
  std::vector<Offset> array_entries() const;
  /// Structural invariant sweep; returns one message per violation.
  std::vector<std::string> check() const;

 private:
  CibDirectory(PmRegion& region, Offset inode_area) : Directory(region, inode_area) {}

  std::uint64_t field(Offset off) const { return region_->read_u64(inode_area_ + off); }
  void install_array(std::span<const Offset> entries);
  std::vector<Offset> walk(bool strict) const;
};

}  // namespace cib
