#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "cib/pm_region.hpp"

namespace cib {

using HashKey = std::uint64_t;
using InodeNo = std::uint64_t;

inline constexpr std::size_t kMaxNameLen = 255;
inline constexpr std::uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

/// FNV-1a, 64-bit. No length checks; see hash_name().
constexpr HashKey fnv1a64(std::string_view bytes) noexcept {
  HashKey h = kFnvOffsetBasis;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

/// Throws EmptyName / NameTooLong for names outside 1..255 bytes.
void validate_name(std::string_view name);

/// Hash key of a filename. Collisions are legal and resolved by comparing names.
HashKey hash_name(std::string_view name);

/// Fixed 24-byte directory entry: (hash_key, inode_no, name_ptr), little-endian.
struct Dentry {
  static constexpr std::size_t kSize = 24;

  HashKey hash_key = 0;
  InodeNo inode_no = 0;
  Offset name_ptr = 0;

  std::array<std::uint8_t, kSize> encode() const noexcept;
  static Dentry decode(std::span<const std::uint8_t, kSize> bytes) noexcept;

  friend bool operator==(const Dentry&, const Dentry&) = default;
};

// Name heap. A record is a 16-bit length followed by the name bytes, padded to
// an 8-byte boundary. Records are append-only and never rewritten.

/// Bytes a record for a name of `len` bytes occupies in the heap.
constexpr std::uint64_t name_record_size(std::size_t len) noexcept { return round_up(2 + len, 8); }

/// Writes a record, persists it, and returns its offset.
Offset append_name(PmRegion& region, std::string_view name);

/// Zero-copy view of a record's bytes. Throws CorruptRecord on a bad record.
std::string_view name_view(const PmRegion& region, Offset record);

inline std::string read_name(const PmRegion& region, Offset record) {
  return std::string(name_view(region, record));
}

}  // namespace cib
