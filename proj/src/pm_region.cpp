#include "cib/pm_region.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <string>

namespace cib {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::MisalignedAtomic: return "MisalignedAtomic";
    case Errc::OutOfSpace: return "OutOfSpace";
    case Errc::EmptyName: return "EmptyName";
    case Errc::NameTooLong: return "NameTooLong";
    case Errc::CorruptRecord: return "CorruptRecord";
    case Errc::KeyOutOfRange: return "KeyOutOfRange";
    case Errc::BlockFull: return "BlockFull";
    case Errc::SlotNotValid: return "SlotNotValid";
    case Errc::NotFound: return "NotFound";
    case Errc::AlreadyExists: return "AlreadyExists";
    case Errc::UnsplittableBlock: return "UnsplittableBlock";
    case Errc::CorruptLayout: return "CorruptLayout";
    case Errc::BadImage: return "BadImage";
  }
  return "Unknown";
}

void PmRegion::FreeDeleter::operator()(std::uint8_t* p) const noexcept { std::free(p); }

PmRegion::PmRegion(std::uint64_t capacity) : PmRegion(capacity, true) {}

PmRegion::PmRegion(std::uint64_t capacity, bool format) : capacity_(capacity) {
  if (capacity < kSuperblockSize + kBlockSize || capacity % kBlockSize != 0) {
    throw Error(Errc::OutOfBounds, "region capacity must be a multiple of 4096 and hold at least two blocks");
  }
  // calloc of a large size maps zero pages lazily, so a 1 GiB region is cheap until touched.
  data_.reset(static_cast<std::uint8_t*>(std::calloc(capacity, 1)));
  if (!data_) throw Error(Errc::OutOfSpace, "cannot allocate region backing store");
  if (format) {
    write_u64(kSbMagic, kMagic);
    write_u64(kSbCapacity, capacity);
    write_u64(kSbBump, kSuperblockSize);
    persist_barrier();
    stats_ = {};
  }
}

PmRegion::PmRegion(PmRegion&&) noexcept = default;
PmRegion& PmRegion::operator=(PmRegion&&) noexcept = default;
PmRegion::~PmRegion() = default;

PmRegion PmRegion::from_image(std::span<const std::uint8_t> image) {
  if (image.size() < 16 || load_le64(image.data() + kSbMagic) != kMagic) {
    throw Error(Errc::BadImage, "missing region magic");
  }
  const std::uint64_t capacity = load_le64(image.data() + kSbCapacity);
  if (image.size() > capacity) throw Error(Errc::BadImage, "image larger than its recorded capacity");
  PmRegion r(capacity, false);
  std::copy(image.begin(), image.end(), r.data_.get());
  r.high_water_ = image.size();
  return r;
}

PmRegion PmRegion::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::BadImage, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_image(bytes);
}

void PmRegion::dump(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::BadImage, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(data_.get()), static_cast<std::streamsize>(high_water_));
  if (!out) throw Error(Errc::BadImage, "short write to " + path.string());
}

void PmRegion::check_range(Offset offset, std::uint64_t len) const {
  if (offset > capacity_ || len > capacity_ - offset) {
    throw Error(Errc::OutOfBounds, "access [" + std::to_string(offset) + ", +" + std::to_string(len) +
                                       ") exceeds capacity " + std::to_string(capacity_));
  }
}

std::span<const std::uint8_t> PmRegion::view(Offset offset, std::uint64_t len) const {
  check_range(offset, len);
  return {data_.get() + offset, len};
}

std::uint64_t PmRegion::read_u64(Offset offset) const {
  check_range(offset, 8);
  return load_le64(data_.get() + offset);
}

void PmRegion::read_bytes(Offset offset, std::span<std::uint8_t> out) const {
  check_range(offset, out.size());
  std::copy_n(data_.get() + offset, out.size(), out.data());
}

void PmRegion::record_write(Offset offset, std::span<const std::uint8_t> data) {
  const std::uint64_t n = data.size();
  if (n == 0) return;
  stats_.bytes_written += n;
  stats_.words_written += (offset + n + 7) / 8 - offset / 8;
  high_water_ = std::max(high_water_, offset + n);
  if (log_writes_) write_log_.push_back({offset, {data.begin(), data.end()}, stats_.barriers});
}

void PmRegion::write_bytes(Offset offset, std::span<const std::uint8_t> data) {
  check_range(offset, data.size());
  std::copy(data.begin(), data.end(), data_.get() + offset);
  record_write(offset, data);
}

void PmRegion::write_u64(Offset offset, std::uint64_t value) {
  std::uint8_t buf[8];
  store_le64(buf, value);
  write_bytes(offset, buf);
}

void PmRegion::write_atomic64(Offset offset, std::uint64_t value) {
  if (offset % 8 != 0) throw Error(Errc::MisalignedAtomic, "offset " + std::to_string(offset));
  // Snapshots are only taken at barriers, so a single store is indivisible here.
  write_u64(offset, value);
}

Snapshot PmRegion::take_snapshot() const {
  return {stats_.barriers, std::vector<std::uint8_t>(data_.get(), data_.get() + high_water_)};
}

void PmRegion::persist_barrier() {
  const std::uint64_t index = stats_.barriers++;
  const bool planned = crash_plan_ && crash_plan_->barrier == index;
  if (planned || capture_all_) {
    snapshots_.push_back({index, std::vector<std::uint8_t>(data_.get(), data_.get() + high_water_)});
  }
  if (planned && crash_plan_->halt) throw SimulatedCrash(index);
}

Offset PmRegion::alloc_block() {
  const Offset head = read_u64(kSbFreeHead);
  if (head != 0) {
    write_atomic64(kSbFreeHead, read_u64(head));
    return head;
  }
  return alloc_extent(1);
}

Offset PmRegion::alloc_extent(std::uint64_t pages) {
  const Offset bump_at = read_u64(kSbBump);
  const std::uint64_t bytes = pages * kBlockSize;
  if (pages == 0 || bytes / kBlockSize != pages || bytes > capacity_ - bump_at) {
    throw Error(Errc::OutOfSpace, "cannot allocate " + std::to_string(pages) + " block(s)");
  }
  write_atomic64(kSbBump, bump_at + bytes);
  return bump_at;
}

void PmRegion::free_block(Offset block) {
  if (block % kBlockSize != 0 || block < kSuperblockSize || block >= read_u64(kSbBump)) {
    throw Error(Errc::OutOfBounds, "free of non-block offset " + std::to_string(block));
  }
  write_atomic64(block, read_u64(kSbFreeHead));
  write_atomic64(kSbFreeHead, block);
}

Offset PmRegion::alloc_name_bytes(std::uint64_t n) {
  const std::uint64_t need = round_up(std::max<std::uint64_t>(n, 1), 8);
  if (need > kNameChunkSize) throw Error(Errc::OutOfSpace, "name allocation larger than a chunk");
  Offset cursor = read_u64(kSbNameCursor);
  const Offset limit = read_u64(kSbNameLimit);
  if (cursor == 0 || limit - cursor < need) {
    cursor = alloc_extent(kNameChunkSize / kBlockSize);
    write_atomic64(kSbNameLimit, cursor + kNameChunkSize);
  }
  write_atomic64(kSbNameCursor, cursor + need);
  return cursor;
}

Offset PmRegion::alloc_inode_area() {
  const std::uint64_t count = read_u64(kSbInodeCount);
  if (count >= kMaxInodes) throw Error(Errc::OutOfSpace, "inode table full");
  write_atomic64(kSbInodeCount, count + 1);
  return kInodeTable + count * kInodeAreaSize;
}

std::uint64_t default_region_capacity() {
  if (const char* env = std::getenv("BENCH_REGION_BYTES"); env && *env) {
    const std::uint64_t v = std::strtoull(env, nullptr, 10);
    if (v > 0) return round_up(v, PmRegion::kBlockSize);
  }
  return PmRegion::kDefaultCapacity;
}

}  // namespace cib
