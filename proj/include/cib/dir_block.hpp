#pragma once

// A 4096-byte CIB directory block.
//
//   0   min_key    u64
//   8   max_key    u64
//   16  next_ptr   u64   successor block, 0 = end of list
//   24  flags      u64   bit 0 = SPLIT_IN_PROGRESS
//   32  bitmap     4 x u64; bit i of the block = bit (i % 64) of word (i / 64).
//                  Bits 0..167 mark valid slots, 168..255 stay zero.
//   64  slots      168 x 24-byte Dentry; slot i at 64 + 24 * i
//
// Slot contents are never cleared. A slot is live iff its bitmap bit is set.

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cib/dentry.hpp"
#include "cib/pm_region.hpp"

namespace cib::block {

inline constexpr std::uint64_t kBlockSize = PmRegion::kBlockSize;
inline constexpr std::uint64_t kHeaderSize = 64;
inline constexpr unsigned kSlots = 168;
inline constexpr unsigned kBitmapWords = 4;

inline constexpr Offset kMinKeyOff = 0;
inline constexpr Offset kMaxKeyOff = 8;
inline constexpr Offset kNextOff = 16;
inline constexpr Offset kFlagsOff = 24;
inline constexpr Offset kBitmapOff = 32;

inline constexpr std::uint64_t kSplitInProgress = 1;

static_assert(kHeaderSize + kSlots * Dentry::kSize == kBlockSize);

using Bitmap = std::array<std::uint64_t, kBitmapWords>;

struct BlockHeader {
  HashKey min_key = 0;
  HashKey max_key = ~HashKey{0};
  Offset next_ptr = 0;
  std::uint64_t flags = 0;
  Bitmap bitmap{};

  bool covers(HashKey key) const noexcept { return min_key <= key && key <= max_key; }
  std::array<std::uint8_t, kHeaderSize> encode() const noexcept;
  friend bool operator==(const BlockHeader&, const BlockHeader&) = default;
};

constexpr Offset slot_offset(Offset block, unsigned slot) noexcept {
  return block + kHeaderSize + Offset{slot} * Dentry::kSize;
}

inline bool bit_set(const Bitmap& bm, unsigned slot) noexcept {
  return (bm[slot / 64] >> (slot % 64)) & 1U;
}

inline unsigned popcount(const Bitmap& bm) noexcept {
  unsigned n = 0;
  for (auto w : bm) n += static_cast<unsigned>(std::popcount(w));
  return n;
}

BlockHeader read_header(const PmRegion& region, Offset block);
Bitmap read_bitmap(const PmRegion& region, Offset block);
Dentry read_slot(const PmRegion& region, Offset block, unsigned slot);

/// Writes a fresh block image: the header followed by `dentries` in slots 0..n-1.
/// Does not persist.
void write_fresh(PmRegion& region, Offset block, const BlockHeader& header,
                 std::span<const Dentry> dentries);

struct SlotHit {
  unsigned slot;
  InodeNo inode_no;
};

/// Finds the live slot holding `name` (whose hash is `key`). Performs no writes.
std::optional<SlotHit> block_lookup(const PmRegion& region, Offset block, HashKey key,
                                    std::string_view name);

/// Takes the lowest free slot. The slot is written and persisted before its
/// bitmap word is published with one atomic store.
unsigned block_insert(PmRegion& region, Offset block, const Dentry& d);

/// Clears the slot's bit with a single atomic bitmap-word store.
void block_delete(PmRegion& region, Offset block, unsigned slot);

unsigned block_valid_count(const PmRegion& region, Offset block);

struct SlotEntry {
  unsigned slot;
  Dentry dentry;
};

/// Live slots in ascending slot order.
std::vector<SlotEntry> block_iter(const PmRegion& region, Offset block);

/// Calls fn(slot) for every set bit below kSlots, ascending.
template <class Fn>
void for_each_valid(const Bitmap& bm, Fn&& fn) {
  for (unsigned w = 0; w < kBitmapWords; ++w) {
    std::uint64_t bits = bm[w];
    while (bits) {
      const unsigned slot = w * 64 + static_cast<unsigned>(std::countr_zero(bits));
      bits &= bits - 1;
      if (slot >= kSlots) return;
      fn(slot);
    }
  }
}

}  // namespace cib::block
