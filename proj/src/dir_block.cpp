#include "cib/dir_block.hpp"

#include <algorithm>

namespace cib::block {

std::array<std::uint8_t, kHeaderSize> BlockHeader::encode() const noexcept {
  std::array<std::uint8_t, kHeaderSize> out{};
  store_le64(out.data() + kMinKeyOff, min_key);
  store_le64(out.data() + kMaxKeyOff, max_key);
  store_le64(out.data() + kNextOff, next_ptr);
  store_le64(out.data() + kFlagsOff, flags);
  for (unsigned w = 0; w < kBitmapWords; ++w) store_le64(out.data() + kBitmapOff + 8 * w, bitmap[w]);
  return out;
}

BlockHeader read_header(const PmRegion& region, Offset block) {
  const auto b = region.view(block, kHeaderSize);
  BlockHeader h;
  h.min_key = load_le64(b.data() + kMinKeyOff);
  h.max_key = load_le64(b.data() + kMaxKeyOff);
  h.next_ptr = load_le64(b.data() + kNextOff);
  h.flags = load_le64(b.data() + kFlagsOff);
  for (unsigned w = 0; w < kBitmapWords; ++w) h.bitmap[w] = load_le64(b.data() + kBitmapOff + 8 * w);
  return h;
}

Bitmap read_bitmap(const PmRegion& region, Offset block) {
  const auto b = region.view(block + kBitmapOff, 8 * kBitmapWords);
  Bitmap bm;
  for (unsigned w = 0; w < kBitmapWords; ++w) bm[w] = load_le64(b.data() + 8 * w);
  return bm;
}

Dentry read_slot(const PmRegion& region, Offset block, unsigned slot) {
  return Dentry::decode(region.view(slot_offset(block, slot), Dentry::kSize).first<Dentry::kSize>());
}

void write_fresh(PmRegion& region, Offset block, const BlockHeader& header,
                 std::span<const Dentry> dentries) {
  std::array<std::uint8_t, kBlockSize> buf;
  const auto h = header.encode();
  std::copy(h.begin(), h.end(), buf.begin());
  std::size_t at = kHeaderSize;
  for (const Dentry& d : dentries) {
    const auto e = d.encode();
    std::copy(e.begin(), e.end(), buf.begin() + static_cast<std::ptrdiff_t>(at));
    at += Dentry::kSize;
  }
  region.write_bytes(block, std::span<const std::uint8_t>(buf.data(), at));
}

std::optional<SlotHit> block_lookup(const PmRegion& region, Offset block, HashKey key,
                                    std::string_view name) {
  const auto b = region.view(block, kBlockSize);
  Bitmap bm;
  for (unsigned w = 0; w < kBitmapWords; ++w) bm[w] = load_le64(b.data() + kBitmapOff + 8 * w);
  std::optional<SlotHit> hit;
  for_each_valid(bm, [&](unsigned slot) {
    if (hit) return;
    const std::uint8_t* s = b.data() + kHeaderSize + slot * Dentry::kSize;
    if (load_le64(s) != key) return;
    if (name_view(region, load_le64(s + 16)) == name) hit = SlotHit{slot, load_le64(s + 8)};
  });
  return hit;
}

unsigned block_insert(PmRegion& region, Offset block, const Dentry& d) {
  const BlockHeader h = read_header(region, block);
  if (!h.covers(d.hash_key)) throw Error(Errc::KeyOutOfRange, "dentry key outside block range");
  unsigned slot = kSlots;
  for (unsigned w = 0; w < kBitmapWords && slot == kSlots; ++w) {
    if (~h.bitmap[w] != 0) slot = w * 64 + static_cast<unsigned>(std::countr_one(h.bitmap[w]));
  }
  if (slot >= kSlots) throw Error(Errc::BlockFull);

  const auto bytes = d.encode();
  region.write_bytes(slot_offset(block, slot), bytes);
  region.persist_barrier();
  const unsigned w = slot / 64;
  region.write_atomic64(block + kBitmapOff + 8 * w, h.bitmap[w] | (std::uint64_t{1} << (slot % 64)));
  region.persist_barrier();
  return slot;
}

void block_delete(PmRegion& region, Offset block, unsigned slot) {
  if (slot >= kSlots) throw Error(Errc::SlotNotValid, "slot " + std::to_string(slot));
  const Offset word_at = block + kBitmapOff + 8 * (slot / 64);
  const std::uint64_t word = region.read_u64(word_at);
  const std::uint64_t mask = std::uint64_t{1} << (slot % 64);
  if (!(word & mask)) throw Error(Errc::SlotNotValid, "slot " + std::to_string(slot));
  region.write_atomic64(word_at, word & ~mask);
  region.persist_barrier();
}

unsigned block_valid_count(const PmRegion& region, Offset block) {
  Bitmap bm = read_bitmap(region, block);
  bm[kBitmapWords - 1] &= (std::uint64_t{1} << (kSlots % 64)) - 1;
  return popcount(bm);
}

std::vector<SlotEntry> block_iter(const PmRegion& region, Offset block) {
  std::vector<SlotEntry> out;
  for_each_valid(read_bitmap(region, block),
                 [&](unsigned slot) { out.push_back({slot, read_slot(region, block, slot)}); });
  return out;
}

}  // namespace cib::block
