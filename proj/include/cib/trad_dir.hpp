#pragma once

// Conventional sequential-scan directory, ext2 style.
//
// Directory blocks are 4096 bytes tiled by variable-length records:
//   0   inode_no   u64 (0 = free hole)
//   8   d_len      u16 record length including padding
//   10  name_len   u8
//   11  file_type  u8 (unused, 0)
//   12  name       name_len bytes
// d_len >= round_up(12 + name_len, 4) and the d_len values of a block sum to 4096.
//
// Blocks are reached through a chain of index pages: u64 count, u64 next page,
// then up to 510 block offsets.
//
// Inode area: 0 first index page, 8 block count, 16 last index page, 40 kind tag.

#include "cib/directory.hpp"

namespace cib {

class TradDirectory final : public Directory {
 public:
  static constexpr std::uint64_t kRecordHeader = 12;
  static constexpr std::uint64_t kIndexFanout = 510;

  static TradDirectory format(PmRegion& region);
  static TradDirectory attach(PmRegion& region, Offset inode_area);

  static constexpr std::uint64_t record_len(std::size_t name_len) noexcept {
    return round_up(kRecordHeader + name_len, 4);
  }

  std::optional<InodeNo> find(std::string_view name) const override;
  void create(std::string_view name, InodeNo inode_no) override;
  void remove(std::string_view name) override;
  std::vector<DirEntry> readdir() const override;
  std::uint64_t aux_bytes() const override { return 0; }

  std::uint64_t block_count() const { return region_->read_u64(inode_area_ + 8); }
  std::vector<Offset> blocks() const;

  struct Record {
    Offset at;
    InodeNo inode_no;
    std::uint16_t d_len;
    std::string name;
  };
  /// Every record of one block in order, holes included.
  std::vector<Record> records(Offset block) const;
  /// Tiling and record-format sweep; one message per violation.
  std::vector<std::string> check() const;

 private:
  TradDirectory(PmRegion& region, Offset inode_area) : Directory(region, inode_area) {}

  struct Hole {
    Offset at = 0;
    std::uint16_t d_len = 0;
  };
  struct ScanResult {
    std::optional<Offset> match;  // record holding the name
    Hole hole;                    // first free record large enough, at == 0 if none
    Offset prev = 0;              // record before `match` in the same block, 0 if first
    std::uint64_t visited = 0;
  };
  ScanResult scan(std::string_view name, std::uint64_t need) const;
  Offset append_block();
};

}  // namespace cib
