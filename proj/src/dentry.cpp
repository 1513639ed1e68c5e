#include "cib/dentry.hpp"

#include <algorithm>
#include <vector>

namespace cib {

void validate_name(std::string_view name) {
  if (name.empty()) throw Error(Errc::EmptyName);
  if (name.size() > kMaxNameLen) throw Error(Errc::NameTooLong, std::to_string(name.size()) + " bytes");
}

HashKey hash_name(std::string_view name) {
  validate_name(name);
  return fnv1a64(name);
}

std::array<std::uint8_t, Dentry::kSize> Dentry::encode() const noexcept {
  std::array<std::uint8_t, kSize> out{};
  store_le64(out.data(), hash_key);
  store_le64(out.data() + 8, inode_no);
  store_le64(out.data() + 16, name_ptr);
  return out;
}

Dentry Dentry::decode(std::span<const std::uint8_t, kSize> bytes) noexcept {
  return {load_le64(bytes.data()), load_le64(bytes.data() + 8), load_le64(bytes.data() + 16)};
}

Offset append_name(PmRegion& region, std::string_view name) {
  validate_name(name);
  const Offset at = region.alloc_name_bytes(name_record_size(name.size()));
  // Padding is left as-is: chunks come from never-used, zeroed space.
  std::uint8_t buf[2 + kMaxNameLen];
  store_le16(buf, static_cast<std::uint16_t>(name.size()));
  std::copy(name.begin(), name.end(), buf + 2);
  region.write_bytes(at, std::span<const std::uint8_t>(buf, 2 + name.size()));
  region.persist_barrier();
  return at;
}

std::string_view name_view(const PmRegion& region, Offset record) {
  const std::uint64_t allocated = region.bump();
  if (record < PmRegion::kSuperblockSize || record % 8 != 0 || record + 2 > allocated) {
    throw Error(Errc::CorruptRecord, "name pointer " + std::to_string(record) + " outside the heap");
  }
  const auto len_bytes = region.view(record, 2);
  const std::uint16_t len = load_le16(len_bytes.data());
  if (len == 0 || len > kMaxNameLen || record + 2 + len > allocated) {
    throw Error(Errc::CorruptRecord, "bad name length " + std::to_string(len));
  }
  const auto bytes = region.view(record + 2, len);
  return {reinterpret_cast<const char*>(bytes.data()), bytes.size()};
}

}  // namespace cib
