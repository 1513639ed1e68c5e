#pragma once

// Simulated byte-addressable persistent memory.
//
// A PmRegion is a flat, zero-initialised byte array with instrumented writes.
// Durability is modelled at persist-barrier granularity: a crash can only
// happen at a barrier, and a crash snapshot taken at barrier k contains every
// write issued before barrier k and nothing after it. 8-byte atomic writes are
// therefore never torn.
//
// Region layout (little-endian):
//
//   [0, 4096)       superblock
//     0   magic           "CIBPMR01"
//     8   capacity
//     16  bump pointer    next never-used byte, 4096-aligned
//     24  free-block head LIFO list threaded through the first word of each block
//     32  name cursor     next free byte in the current name chunk
//     40  name limit      end of the current name chunk
//     48  inode count     number of directory inode areas handed out
//     56  reserved
//     64  inode areas     63 x 64 bytes, one per directory
//   [4096, ...)     blocks, arrays and name chunks

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cib/bytes.hpp"
#include "cib/error.hpp"

namespace cib {

struct WriteStats {
  std::uint64_t bytes_written = 0;
  /// Distinct 8-byte-aligned words overlapped by each write call, summed.
  std::uint64_t words_written = 0;
  std::uint64_t barriers = 0;

  friend WriteStats operator-(const WriteStats& a, const WriteStats& b) {
    return {a.bytes_written - b.bytes_written, a.words_written - b.words_written,
            a.barriers - b.barriers};
  }
  friend bool operator==(const WriteStats&, const WriteStats&) = default;
};

/// Selects the barrier at which a crash snapshot is taken.
struct CrashPlan {
  std::uint64_t barrier = 0;  // 0-based index of the barrier to crash at
  bool halt = true;           // throw SimulatedCrash once the snapshot is taken
};

struct Snapshot {
  std::uint64_t barrier = 0;
  std::vector<std::uint8_t> image;  // region contents up to the write high-water mark
};

/// Thrown out of persist_barrier() when a halting crash plan fires.
class SimulatedCrash : public std::exception {
 public:
  explicit SimulatedCrash(std::uint64_t barrier) : barrier_(barrier) {}
  std::uint64_t barrier() const noexcept { return barrier_; }
  const char* what() const noexcept override { return "simulated crash"; }

 private:
  std::uint64_t barrier_;
};

struct WriteRecord {
  Offset offset;
  std::vector<std::uint8_t> data;
  std::uint64_t epoch;  // number of barriers issued before this write
};

class PmRegion {
 public:
  static constexpr std::uint64_t kMagic = 0x3130524d50424943ULL;  // "CIBPMR01"
  static constexpr std::uint64_t kBlockSize = 4096;
  static constexpr std::uint64_t kSuperblockSize = 4096;
  static constexpr std::uint64_t kDefaultCapacity = 1ULL << 30;
  static constexpr std::uint64_t kNameChunkSize = 16 * kBlockSize;

  // Superblock field offsets.
  static constexpr Offset kSbMagic = 0;
  static constexpr Offset kSbCapacity = 8;
  static constexpr Offset kSbBump = 16;
  static constexpr Offset kSbFreeHead = 24;
  static constexpr Offset kSbNameCursor = 32;
  static constexpr Offset kSbNameLimit = 40;
  static constexpr Offset kSbInodeCount = 48;
  static constexpr Offset kInodeTable = 64;
  static constexpr std::uint64_t kInodeAreaSize = 64;
  static constexpr std::uint64_t kMaxInodes = (kSuperblockSize - kInodeTable) / kInodeAreaSize;

  /// Creates a zeroed, formatted region. Stats start at zero after formatting.
  explicit PmRegion(std::uint64_t capacity = kDefaultCapacity);

  /// Rebuilds a region from an image (e.g. a crash snapshot). Capacity is taken
  /// from the image's superblock.
  static PmRegion from_image(std::span<const std::uint8_t> image);
  static PmRegion load(const std::filesystem::path& path);

  PmRegion(PmRegion&&) noexcept;
  PmRegion& operator=(PmRegion&&) noexcept;
  ~PmRegion();

  std::uint64_t capacity() const noexcept { return capacity_; }
  const WriteStats& stats() const noexcept { return stats_; }
  /// One past the highest byte ever written.
  std::uint64_t high_water() const noexcept { return high_water_; }

  // Reads never touch stats.
  std::span<const std::uint8_t> view(Offset offset, std::uint64_t len) const;
  std::uint64_t read_u64(Offset offset) const;
  void read_bytes(Offset offset, std::span<std::uint8_t> out) const;

  void write_bytes(Offset offset, std::span<const std::uint8_t> data);
  /// Plain (non-atomic) little-endian store, accounted like write_bytes.
  void write_u64(Offset offset, std::uint64_t value);
  void write_atomic64(Offset offset, std::uint64_t value);
  void persist_barrier();

  void set_crash_plan(std::optional<CrashPlan> plan) { crash_plan_ = plan; }
  /// Records a snapshot at every barrier. Meant for small property tests.
  void capture_every_barrier(bool on) { capture_all_ = on; }
  const std::vector<Snapshot>& snapshots() const noexcept { return snapshots_; }
  Snapshot take_snapshot() const;

  void enable_write_log(bool on) { log_writes_ = on; }
  const std::vector<WriteRecord>& write_log() const noexcept { return write_log_; }

  // Allocator. Block allocation pops the LIFO free list before bumping.
  Offset alloc_block();
  /// Contiguous run of `pages` blocks, always carved from the bump pointer.
  Offset alloc_extent(std::uint64_t pages);
  void free_block(Offset block);
  /// 8-byte aligned bytes from the name chunk; name space is never reclaimed.
  Offset alloc_name_bytes(std::uint64_t n);
  /// Hands out the next 64-byte directory inode area.
  Offset alloc_inode_area();

  std::uint64_t bump() const { return read_u64(kSbBump); }
  std::uint64_t inode_count() const { return read_u64(kSbInodeCount); }

  /// Current contents up to the write high-water mark.
  std::span<const std::uint8_t> image() const { return {data_.get(), high_water_}; }
  void dump(const std::filesystem::path& path) const;

 private:
  struct FreeDeleter {
    void operator()(std::uint8_t* p) const noexcept;
  };

  PmRegion(std::uint64_t capacity, bool format);
  void check_range(Offset offset, std::uint64_t len) const;
  void record_write(Offset offset, std::span<const std::uint8_t> data);

  std::uint64_t capacity_ = 0;
  std::unique_ptr<std::uint8_t[], FreeDeleter> data_;
  WriteStats stats_;
  std::uint64_t high_water_ = 0;
  std::optional<CrashPlan> crash_plan_;
  bool capture_all_ = false;
  std::vector<Snapshot> snapshots_;
  bool log_writes_ = false;
  std::vector<WriteRecord> write_log_;
};

/// Capacity for benchmark regions: BENCH_REGION_BYTES if set, else the default.
std::uint64_t default_region_capacity();

}  // namespace cib
