#include "cib/cib_index.hpp"

#include <algorithm>
#include <limits>
#include <unordered_map>
#include <unordered_set>

namespace cib {

namespace {

constexpr HashKey kMaxKey = std::numeric_limits<HashKey>::max();

std::uint64_t array_pages(std::uint64_t length) {
  return round_up(8 + 8 * length, PmRegion::kBlockSize) / PmRegion::kBlockSize;
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

CibDirectory CibDirectory::format(PmRegion& region, std::uint64_t accel_threshold) {
  const Offset inode = region.alloc_inode_area();
  const Offset head = region.alloc_block();
  block::write_fresh(region, head, block::BlockHeader{}, {});

  std::uint8_t area[48] = {};
  store_le64(area + kListHeadOff, head);
  store_le64(area + kBlockCountOff, 1);
  store_le64(area + kAccelThresholdOff, std::max<std::uint64_t>(accel_threshold, 1));
  store_le64(area + kInodeKindOff, static_cast<std::uint64_t>(DirKind::Cib));
  region.write_bytes(inode, area);
  region.persist_barrier();
  return CibDirectory(region, inode);
}

CibDirectory CibDirectory::attach(PmRegion& region, Offset inode_area) {
  if (read_dir_kind(region, inode_area) != DirKind::Cib) {
    throw Error(Errc::CorruptLayout, "inode area does not hold a CIB directory");
  }
  return CibDirectory(region, inode_area);
}

std::vector<Offset> CibDirectory::walk(bool strict) const {
  std::vector<Offset> out;
  const std::uint64_t limit = region_->bump() / PmRegion::kBlockSize;
  for (Offset b = list_head(); b != 0; b = region_->read_u64(b + block::kNextOff)) {
    if (b % PmRegion::kBlockSize != 0 || b >= region_->bump() || out.size() > limit) {
      if (!strict) break;
      throw Error(Errc::CorruptLayout, "block list leaves allocated space or loops");
    }
    out.push_back(b);
  }
  return out;
}

std::vector<Offset> CibDirectory::blocks() const { return walk(true); }

std::vector<Offset> CibDirectory::array_entries() const {
  const Offset arr = array_ptr();
  if (arr == 0) return {};
  const std::uint64_t n = region_->read_u64(arr);
  const auto raw = region_->view(arr + 8, 8 * n);
  std::vector<Offset> out(n);
  for (std::uint64_t i = 0; i < n; ++i) out[i] = load_le64(raw.data() + 8 * i);
  return out;
}

CibDirectory::Located CibDirectory::locate(HashKey key) const {
  const Offset arr = array_ptr();
  if (arr == 0 || block_count() <= accel_threshold()) {
    std::uint32_t probes = 0;
    for (Offset b = list_head(); b != 0; b = region_->read_u64(b + block::kNextOff)) {
      ++probes;
      if (key <= region_->read_u64(b + block::kMaxKeyOff)) return {b, probes};
    }
    throw Error(Errc::CorruptLayout, "no block covers key " + hex(key));
  }

  const std::uint64_t n = region_->read_u64(arr);
  const auto raw = region_->view(arr + 8, 8 * n);
  std::uint32_t probes = 0;
  std::uint64_t lo = 0;
  std::uint64_t hi = n;
  while (lo < hi) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    const Offset b = load_le64(raw.data() + 8 * mid);
    const auto h = region_->view(b, 16);
    ++probes;
    if (key < load_le64(h.data() + block::kMinKeyOff)) {
      hi = mid;
    } else if (key > load_le64(h.data() + block::kMaxKeyOff)) {
      lo = mid + 1;
    } else {
      return {b, probes};
    }
  }
  throw Error(Errc::CorruptLayout, "block array does not cover key " + hex(key));
}

Offset CibDirectory::locate_block(HashKey key) const {
  const Located loc = locate(key);
  probes_->record(loc.probes);
  return loc.block;
}

std::optional<InodeNo> CibDirectory::find(std::string_view name) const {
  const HashKey key = hash_name(name);
  const Offset b = locate_block(key);
  if (auto hit = block::block_lookup(*region_, b, key, name)) return hit->inode_no;
  return std::nullopt;
}

void CibDirectory::create(std::string_view name, InodeNo inode_no) {
  const HashKey key = hash_name(name);
  Offset b = locate_block(key);
  if (block::block_lookup(*region_, b, key, name)) throw Error(Errc::AlreadyExists, std::string(name));
  if (block::block_valid_count(*region_, b) == block::kSlots) {
    split_block(b);
    b = locate_block(key);
  }
  const Offset name_ptr = append_name(*region_, name);
  block::block_insert(*region_, b, Dentry{key, inode_no, name_ptr});
}

void CibDirectory::remove(std::string_view name) {
  const HashKey key = hash_name(name);
  const Offset b = locate_block(key);
  const auto hit = block::block_lookup(*region_, b, key, name);
  if (!hit) throw Error(Errc::NotFound, std::string(name));
  block::block_delete(*region_, b, hit->slot);
}

std::vector<DirEntry> CibDirectory::readdir() const {
  std::vector<DirEntry> out;
  for (Offset b : walk(true)) {
    const auto bytes = region_->view(b, block::kBlockSize);
    block::Bitmap bm;
    for (unsigned w = 0; w < block::kBitmapWords; ++w) bm[w] = load_le64(bytes.data() + block::kBitmapOff + 8 * w);
    block::for_each_valid(bm, [&](unsigned slot) {
      const std::uint8_t* s = bytes.data() + block::kHeaderSize + slot * Dentry::kSize;
      out.push_back({std::string(name_view(*region_, load_le64(s + 16))), load_le64(s + 8)});
    });
  }
  return out;
}

std::uint64_t CibDirectory::aux_bytes() const {
  const Offset arr = array_ptr();
  return arr == 0 ? 0 : 8 + 8 * region_->read_u64(arr);
}

void CibDirectory::install_array(std::span<const Offset> entries) {
  const std::uint64_t pages = array_pages(entries.size());
  const Offset fresh = pages == 1 ? region_->alloc_block() : region_->alloc_extent(pages);
  std::vector<std::uint8_t> buf(8 + 8 * entries.size());
  store_le64(buf.data(), entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) store_le64(buf.data() + 8 + 8 * i, entries[i]);
  region_->write_bytes(fresh, buf);
  region_->persist_barrier();

  const Offset old = array_ptr();
  region_->write_atomic64(inode_area_ + kArrayPtrOff, fresh);
  region_->persist_barrier();

  if (old != 0) {
    const std::uint64_t old_pages = array_pages(region_->read_u64(old));
    for (std::uint64_t p = 0; p < old_pages; ++p) region_->free_block(old + p * PmRegion::kBlockSize);
    region_->persist_barrier();
  }
}

void CibDirectory::build_array() { install_array(walk(true)); }

void CibDirectory::split_block(Offset b) {
  const block::BlockHeader h = block::read_header(*region_, b);
  const std::vector<block::SlotEntry> live = block::block_iter(*region_, b);

  std::vector<HashKey> keys;
  keys.reserve(live.size());
  for (const auto& e : live) keys.push_back(e.dentry.hash_key);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  if (keys.size() < 2) throw Error(Errc::UnsplittableBlock, "all live dentries share one hash key");
  const HashKey split_key = keys[(keys.size() + 1) / 2];

  // (1) mark the block
  region_->write_atomic64(b + block::kFlagsOff, h.flags | block::kSplitInProgress);
  region_->persist_barrier();

  // (2) copy the upper set into a new, still unreachable block
  std::vector<Dentry> upper;
  block::Bitmap old_bitmap = h.bitmap;
  for (const auto& e : live) {
    if (e.dentry.hash_key < split_key) continue;
    upper.push_back(e.dentry);
    old_bitmap[e.slot / 64] &= ~(std::uint64_t{1} << (e.slot % 64));
  }
  block::BlockHeader nh;
  nh.min_key = split_key;
  nh.max_key = h.max_key;
  nh.next_ptr = h.next_ptr;
  for (unsigned i = 0; i < upper.size(); ++i) nh.bitmap[i / 64] |= std::uint64_t{1} << (i % 64);
  const Offset nb = region_->alloc_block();
  block::write_fresh(*region_, nb, nh, upper);
  region_->persist_barrier();

  // (3) publish
  region_->write_atomic64(b + block::kNextOff, nb);
  region_->persist_barrier();

  // (4) shrink the old range
  region_->write_atomic64(b + block::kMaxKeyOff, split_key - 1);
  region_->persist_barrier();

  // (5) drop the copied dentries from the old block
  for (unsigned w = 0; w < block::kBitmapWords; ++w) {
    if (old_bitmap[w] != h.bitmap[w]) region_->write_atomic64(b + block::kBitmapOff + 8 * w, old_bitmap[w]);
  }
  region_->persist_barrier();

  // (6) done
  region_->write_atomic64(b + block::kFlagsOff, h.flags & ~block::kSplitInProgress);
  region_->persist_barrier();

  // (7) account for the new block and refresh the array
  const std::uint64_t count = block_count() + 1;
  region_->write_atomic64(inode_area_ + kBlockCountOff, count);
  region_->persist_barrier();
  if (count > accel_threshold()) {
    std::vector<Offset> entries = array_entries();
    const auto at = std::find(entries.begin(), entries.end(), b);
    if (entries.size() + 1 == count && at != entries.end()) {
      // The array was current before the split, so only the new block is missing.
      entries.insert(at + 1, nb);
      install_array(entries);
    } else {
      build_array();
    }
  }
}

RecoveryReport CibDirectory::recover() {
  RecoveryReport report;
  const std::vector<Offset> list = walk(true);
  if (list.empty()) throw Error(Errc::CorruptLayout, "directory has no blocks");

  for (std::size_t i = 0; i < list.size(); ++i) {
    const Offset b = list[i];
    const block::BlockHeader h = block::read_header(*region_, b);
    if (!(h.flags & block::kSplitInProgress)) continue;

    // Whether or not the new block was published, the correct upper bound is
    // just below the successor's range; anything copied beyond it is a duplicate.
    HashKey want_max = kMaxKey;
    if (i + 1 < list.size()) {
      const HashKey next_min = region_->read_u64(list[i + 1] + block::kMinKeyOff);
      if (next_min <= h.min_key) throw Error(Errc::CorruptLayout, "successor range precedes block " + hex(b));
      want_max = next_min - 1;
    }
    if (h.max_key != want_max) {
      region_->write_atomic64(b + block::kMaxKeyOff, want_max);
      region_->persist_barrier();
      report.actions.push_back("block " + hex(b) + ": max_key " + hex(h.max_key) + " -> " + hex(want_max));
    }

    block::Bitmap bm = h.bitmap;
    unsigned dropped = 0;
    for (const auto& e : block::block_iter(*region_, b)) {
      if (e.dentry.hash_key > want_max || e.dentry.hash_key < h.min_key) {
        bm[e.slot / 64] &= ~(std::uint64_t{1} << (e.slot % 64));
        ++dropped;
      }
    }
    if (dropped > 0) {
      for (unsigned w = 0; w < block::kBitmapWords; ++w) {
        if (bm[w] != h.bitmap[w]) region_->write_atomic64(b + block::kBitmapOff + 8 * w, bm[w]);
      }
      region_->persist_barrier();
      report.actions.push_back("block " + hex(b) + ": invalidated " + std::to_string(dropped) +
                               " copied dentries");
    }

    region_->write_atomic64(b + block::kFlagsOff, h.flags & ~block::kSplitInProgress);
    region_->persist_barrier();
    report.actions.push_back("block " + hex(b) + ": cleared split flag");
  }

  // The partition must hold now; nothing else can break it.
  HashKey expect_min = 0;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const block::BlockHeader h = block::read_header(*region_, list[i]);
    const bool last = i + 1 == list.size();
    if (h.min_key != expect_min || h.max_key < h.min_key || (last && h.max_key != kMaxKey)) {
      throw Error(Errc::CorruptLayout, "range partition broken at block " + hex(list[i]));
    }
    expect_min = h.max_key + 1;
  }

  if (block_count() != list.size()) {
    report.actions.push_back("block_count " + std::to_string(block_count()) + " -> " +
                             std::to_string(list.size()));
    region_->write_atomic64(inode_area_ + kBlockCountOff, list.size());
    region_->persist_barrier();
  }

  const bool want_array = list.size() > accel_threshold();
  if ((want_array || array_ptr() != 0) && array_entries() != list) {
    install_array(list);
    report.actions.push_back("rebuilt block array (" + std::to_string(list.size()) + " entries)");
  }
  return report;
}

std::vector<std::string> CibDirectory::check() const {
  std::vector<std::string> bad;
  std::vector<Offset> list;
  try {
    list = walk(true);
  } catch (const Error& e) {
    return {e.what()};
  }
  if (list.empty()) return {"empty block list"};

  std::unordered_map<HashKey, Offset> key_home;
  std::unordered_set<std::string> names;
  HashKey expect_min = 0;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const Offset b = list[i];
    const block::BlockHeader h = block::read_header(*region_, b);
    const std::string where = "block " + hex(b);
    if (h.min_key != expect_min) bad.push_back(where + ": min_key does not abut predecessor");
    if (h.max_key < h.min_key) bad.push_back(where + ": max_key < min_key");
    if (i + 1 == list.size() && h.max_key != kMaxKey) bad.push_back(where + ": last block does not end at 2^64-1");
    if (h.flags != 0) bad.push_back(where + ": flags set");
    if (h.bitmap[block::kBitmapWords - 1] >> (block::kSlots % 64)) bad.push_back(where + ": reserved bitmap bits set");
    expect_min = h.max_key + 1;

    for (const auto& e : block::block_iter(*region_, b)) {
      const Dentry& d = e.dentry;
      if (!h.covers(d.hash_key)) bad.push_back(where + ": slot " + std::to_string(e.slot) + " key outside range");
      if (auto [it, fresh] = key_home.emplace(d.hash_key, b); !fresh && it->second != b) {
        bad.push_back("hash key " + hex(d.hash_key) + " lives in two blocks");
      }
      try {
        const std::string_view name = name_view(*region_, d.name_ptr);
        if (fnv1a64(name) != d.hash_key) bad.push_back(where + ": slot " + std::to_string(e.slot) + " hash mismatch");
        if (!names.emplace(name).second) bad.push_back("duplicate name '" + std::string(name) + "'");
      } catch (const Error& err) {
        bad.push_back(where + ": slot " + std::to_string(e.slot) + ": " + err.what());
      }
    }
  }
  if (block_count() != list.size()) bad.push_back("block_count field disagrees with list length");
  if (list.size() > accel_threshold() && array_ptr() == 0) bad.push_back("no block array above threshold");
  if (array_ptr() != 0 && array_entries() != list) bad.push_back("block array disagrees with list");
  return bad;
}

}  // namespace cib
