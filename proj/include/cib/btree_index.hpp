#pragma once

// B+-tree directory index baseline, keyed by filename hash.
//
// Nodes are 4096 bytes:
//   0   count  u32   entries (leaf) or children (internal)
//   4   leaf   u32   1 = leaf
//   8   next   u64   right sibling leaf (in-place mode only; 0 otherwise)
//   leaf:     16 + 24*i : (hash_key, name_ptr, inode_no), up to 170 entries
//   internal: 16 + 8*i  : separator keys, up to 169
//             1368 + 8*i: child offsets, up to 170
// Separator i is the first key of child i+1, and keys of child i lie within
// [separator i-1, separator i]. Equal hash keys may straddle leaves; lookups
// start at the leftmost candidate leaf and walk right.
//
// With shadowing on, every modified node is rewritten to a fresh node and the
// change propagates copy-on-write up to a new root whose pointer is swapped
// atomically. With shadowing off, nodes are updated in place.
//
// Inode area: 0 root, 8 height, 16 entry count, 24 shadow flag, 40 kind tag.

#include <array>

#include "cib/directory.hpp"

namespace cib {

class BTreeDirectory final : public Directory {
 public:
  static constexpr unsigned kOrder = 170;
  static constexpr unsigned kMaxLeafEntries = 170;
  static constexpr unsigned kMaxChildren = kOrder;
  static constexpr unsigned kMinOccupancy = (kOrder + 1) / 2;
  static constexpr std::uint64_t kNodeHeader = 16;
  static constexpr std::uint64_t kLeafEntrySize = 24;
  static constexpr std::uint64_t kChildrenOff = kNodeHeader + 8 * (kMaxChildren - 1);

  struct Options {
    bool shadow = true;
  };

  static BTreeDirectory format(PmRegion& region, Options options);
  static BTreeDirectory format(PmRegion& region) { return format(region, Options{}); }
  static BTreeDirectory attach(PmRegion& region, Offset inode_area);

  // Raw index operations. bt_insert does not check for duplicates.
  void bt_insert(HashKey key, Offset name_ptr, InodeNo inode_no);
  std::optional<InodeNo> bt_lookup(HashKey key, std::string_view name) const;
  void bt_delete(HashKey key, std::string_view name);

  std::optional<InodeNo> find(std::string_view name) const override;
  void create(std::string_view name, InodeNo inode_no) override;
  void remove(std::string_view name) override;
  std::vector<DirEntry> readdir() const override;
  /// Bytes held by internal nodes.
  std::uint64_t aux_bytes() const override;

  Offset root() const { return region_->read_u64(inode_area_); }
  std::uint64_t height() const { return region_->read_u64(inode_area_ + 8); }
  std::uint64_t size() const { return region_->read_u64(inode_area_ + 16); }
  bool shadowing() const { return region_->read_u64(inode_area_ + 24) != 0; }

  /// Full structural validation. Occupancy is only enforced when requested,
  /// since deletion never rebalances.
  std::vector<std::string> validate(bool check_occupancy) const;

  struct LeafEntry {
    HashKey key;
    Offset name_ptr;
    InodeNo inode_no;
  };

 private:
  BTreeDirectory(PmRegion& region, Offset inode_area) : Directory(region, inode_area) {}

  struct Node {
    bool leaf = true;
    Offset next = 0;
    std::vector<LeafEntry> entries;
    std::vector<HashKey> keys;
    std::vector<Offset> children;
  };
  struct Frame {
    Offset node;
    unsigned index;  // child taken (internal) or entry position (leaf)
  };
  struct Rewrite {
    Offset node;                // where the node now lives
    std::optional<HashKey> sep;  // set if the node split
    Offset right = 0;
  };

  Node read_node(Offset at) const;
  void write_node(Offset at, const Node& n, bool fresh);
  /// Stores `n`, which replaces the node at `old`: in place or shadowed, split if oversized.
  Rewrite store(Offset old, Node n, std::vector<Offset>& retired);
  void propagate(std::vector<Frame>& path, Rewrite r, std::vector<Offset>& retired);

  std::vector<Frame> descend(HashKey key, std::uint64_t& probes) const;
  /// Positions `path` on the entry (key, name); false if absent.
  bool seek(std::vector<Frame>& path, HashKey key, std::string_view name, std::uint64_t& probes) const;
  bool next_leaf(std::vector<Frame>& path, std::uint64_t& probes) const;
};

}  // namespace cib
