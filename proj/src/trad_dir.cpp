#include "cib/trad_dir.hpp"

#include <algorithm>
#include <cstring>
#include <unordered_set>

namespace cib {

namespace {

constexpr Offset kIndexHeadOff = 0;
constexpr Offset kBlockCountOff = 8;
constexpr Offset kIndexTailOff = 16;
constexpr std::uint64_t kBlock = PmRegion::kBlockSize;

}  // namespace

TradDirectory TradDirectory::format(PmRegion& region) {
  const Offset inode = region.alloc_inode_area();
  region.write_atomic64(inode + kInodeKindOff, static_cast<std::uint64_t>(DirKind::Trad));
  region.persist_barrier();
  return TradDirectory(region, inode);
}

TradDirectory TradDirectory::attach(PmRegion& region, Offset inode_area) {
  if (read_dir_kind(region, inode_area) != DirKind::Trad) {
    throw Error(Errc::CorruptLayout, "inode area does not hold a sequential directory");
  }
  return TradDirectory(region, inode_area);
}

std::vector<Offset> TradDirectory::blocks() const {
  std::vector<Offset> out;
  for (Offset page = region_->read_u64(inode_area_ + kIndexHeadOff); page != 0;
       page = region_->read_u64(page + 8)) {
    const std::uint64_t n = region_->read_u64(page);
    const auto raw = region_->view(page + 16, 8 * n);
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(load_le64(raw.data() + 8 * i));
  }
  return out;
}

TradDirectory::ScanResult TradDirectory::scan(std::string_view name, std::uint64_t need) const {
  ScanResult r;
  for (Offset page = region_->read_u64(inode_area_ + kIndexHeadOff); page != 0;
       page = region_->read_u64(page + 8)) {
    const std::uint64_t n = region_->read_u64(page);
    const auto raw = region_->view(page + 16, 8 * n);
    for (std::uint64_t i = 0; i < n; ++i) {
      const Offset blk = load_le64(raw.data() + 8 * i);
      const std::uint8_t* base = region_->view(blk, kBlock).data();
      std::uint64_t pos = 0;
      while (pos < kBlock) {
        const std::uint8_t* rec = base + pos;
        const std::uint16_t d_len = load_le16(rec + 8);
        if (d_len < kRecordHeader || pos + d_len > kBlock) {
          throw Error(Errc::CorruptLayout, "bad d_len in block " + std::to_string(blk));
        }
        ++r.visited;
        if (load_le64(rec) != 0) {
          if (rec[10] == name.size() && std::memcmp(rec + kRecordHeader, name.data(), name.size()) == 0) {
            r.match = blk + pos;
            return r;
          }
        } else if (r.hole.at == 0 && d_len >= need) {
          r.hole = {blk + pos, d_len};
        }
        pos += d_len;
      }
    }
  }
  return r;
}

std::optional<InodeNo> TradDirectory::find(std::string_view name) const {
  validate_name(name);
  const ScanResult r = scan(name, ~std::uint64_t{0});
  probes_->record(r.visited);
  if (!r.match) return std::nullopt;
  return region_->read_u64(*r.match);
}

Offset TradDirectory::append_block() {
  const Offset blk = region_->alloc_block();
  std::uint8_t free_rec[kRecordHeader] = {};
  store_le16(free_rec + 8, static_cast<std::uint16_t>(kBlock));
  region_->write_bytes(blk, free_rec);

  Offset tail = region_->read_u64(inode_area_ + kIndexTailOff);
  if (tail == 0 || region_->read_u64(tail) == kIndexFanout) {
    const Offset page = region_->alloc_block();
    const std::uint8_t zero[16] = {};
    region_->write_bytes(page, zero);
    if (tail == 0) {
      region_->write_atomic64(inode_area_ + kIndexHeadOff, page);
    } else {
      region_->write_atomic64(tail + 8, page);
    }
    region_->write_atomic64(inode_area_ + kIndexTailOff, page);
    tail = page;
  }
  const std::uint64_t n = region_->read_u64(tail);
  region_->write_atomic64(tail + 16 + 8 * n, blk);
  region_->write_atomic64(tail, n + 1);
  region_->write_atomic64(inode_area_ + kBlockCountOff, block_count() + 1);
  return blk;
}

void TradDirectory::create(std::string_view name, InodeNo inode_no) {
  validate_name(name);
  if (inode_no == 0) throw Error(Errc::CorruptRecord, "inode 0 marks a free record");
  const std::uint64_t need = record_len(name.size());
  ScanResult r = scan(name, need);
  probes_->record(r.visited);
  if (r.match) throw Error(Errc::AlreadyExists, std::string(name));

  if (r.hole.at == 0) r.hole = {append_block(), static_cast<std::uint16_t>(kBlock)};

  std::uint16_t d_len = r.hole.d_len;
  if (r.hole.d_len - need >= kRecordHeader) {
    d_len = static_cast<std::uint16_t>(need);
    std::uint8_t rest[kRecordHeader] = {};
    store_le16(rest + 8, static_cast<std::uint16_t>(r.hole.d_len - need));
    region_->write_bytes(r.hole.at + need, rest);
  }
  std::uint8_t rec[kRecordHeader + kMaxNameLen] = {};
  store_le64(rec, inode_no);
  store_le16(rec + 8, d_len);
  rec[10] = static_cast<std::uint8_t>(name.size());
  std::memcpy(rec + kRecordHeader, name.data(), name.size());
  region_->write_bytes(r.hole.at, std::span<const std::uint8_t>(rec, kRecordHeader + name.size()));
  region_->persist_barrier();
}

void TradDirectory::remove(std::string_view name) {
  validate_name(name);
  const ScanResult r = scan(name, ~std::uint64_t{0});
  probes_->record(r.visited);
  if (!r.match) throw Error(Errc::NotFound, std::string(name));

  const Offset at = *r.match;
  region_->write_u64(at, 0);
  const std::uint16_t d_len = load_le16(region_->view(at + 8, 2).data());
  const Offset next = at + d_len;
  if (next % kBlock != 0 && region_->read_u64(next) == 0) {
    const std::uint16_t next_len = load_le16(region_->view(next + 8, 2).data());
    std::uint8_t merged[2];
    store_le16(merged, static_cast<std::uint16_t>(d_len + next_len));
    region_->write_bytes(at + 8, merged);
  }
  region_->persist_barrier();
}

std::vector<TradDirectory::Record> TradDirectory::records(Offset block) const {
  std::vector<Record> out;
  const std::uint8_t* base = region_->view(block, kBlock).data();
  std::uint64_t pos = 0;
  while (pos < kBlock) {
    const std::uint8_t* rec = base + pos;
    const std::uint16_t d_len = load_le16(rec + 8);
    if (d_len < kRecordHeader || pos + d_len > kBlock) {
      throw Error(Errc::CorruptLayout, "bad d_len in block " + std::to_string(block));
    }
    const InodeNo ino = load_le64(rec);
    out.push_back({block + pos, ino, d_len,
                   ino != 0 ? std::string(reinterpret_cast<const char*>(rec + kRecordHeader), rec[10])
                            : std::string()});
    pos += d_len;
  }
  return out;
}

std::vector<DirEntry> TradDirectory::readdir() const {
  std::vector<DirEntry> out;
  for (Offset b : blocks()) {
    for (auto& r : records(b)) {
      if (r.inode_no != 0) out.push_back({std::move(r.name), r.inode_no});
    }
  }
  return out;
}

std::vector<std::string> TradDirectory::check() const {
  std::vector<std::string> bad;
  std::unordered_set<std::string> names;
  const auto list = blocks();
  if (list.size() != block_count()) bad.push_back("block count field disagrees with index");
  for (Offset b : list) {
    const std::uint8_t* base = region_->view(b, kBlock).data();
    std::uint64_t pos = 0;
    while (pos < kBlock) {
      const std::uint8_t* rec = base + pos;
      const std::uint16_t d_len = load_le16(rec + 8);
      if (d_len < kRecordHeader || d_len % 4 != 0 || pos + d_len > kBlock) {
        bad.push_back("block " + std::to_string(b) + ": record at " + std::to_string(pos) + " has bad d_len");
        break;
      }
      if (load_le64(rec) != 0) {
        if (rec[10] == 0 || d_len < record_len(rec[10])) {
          bad.push_back("block " + std::to_string(b) + ": record at " + std::to_string(pos) + " too short");
        }
        std::string name(reinterpret_cast<const char*>(rec + kRecordHeader), rec[10]);
        if (!names.insert(name).second) bad.push_back("duplicate name '" + name + "'");
      }
      pos += d_len;
    }
  }
  return bad;
}

}  // namespace cib
