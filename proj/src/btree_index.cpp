#include "cib/btree_index.hpp"

#include <algorithm>
#include <functional>
#include <unordered_set>

namespace cib {

namespace {

constexpr Offset kRootOff = 0;
constexpr Offset kHeightOff = 8;
constexpr Offset kSizeOff = 16;
constexpr Offset kShadowOff = 24;
constexpr std::uint64_t kNode = PmRegion::kBlockSize;

struct RawNode {
  const std::uint8_t* p;

  std::uint32_t count() const {
    return static_cast<std::uint32_t>(p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t{p[3]} << 24));
  }
  bool leaf() const { return p[4] != 0; }
  HashKey leaf_key(unsigned i) const { return load_le64(p + BTreeDirectory::kNodeHeader + 24 * i); }
  Offset leaf_name(unsigned i) const { return load_le64(p + BTreeDirectory::kNodeHeader + 24 * i + 8); }
  InodeNo leaf_inode(unsigned i) const { return load_le64(p + BTreeDirectory::kNodeHeader + 24 * i + 16); }
  HashKey sep(unsigned i) const { return load_le64(p + BTreeDirectory::kNodeHeader + 8 * i); }
  Offset child(unsigned i) const { return load_le64(p + BTreeDirectory::kChildrenOff + 8 * i); }
};

/// Writes the part of `buf` in [begin, end) that differs from `old`.
void write_diff(PmRegion& region, Offset at, const std::uint8_t* old, const std::uint8_t* buf,
                std::uint64_t begin, std::uint64_t end) {
  while (begin < end && old[begin] == buf[begin]) ++begin;
  while (end > begin && old[end - 1] == buf[end - 1]) --end;
  if (begin < end) region.write_bytes(at + begin, std::span<const std::uint8_t>(buf + begin, end - begin));
}

}  // namespace

BTreeDirectory BTreeDirectory::format(PmRegion& region, Options options) {
  const Offset inode = region.alloc_inode_area();
  const Offset root = region.alloc_block();
  std::uint8_t leaf_header[kNodeHeader] = {};
  leaf_header[4] = 1;
  region.write_bytes(root, leaf_header);

  std::uint8_t area[48] = {};
  store_le64(area + kRootOff, root);
  store_le64(area + kHeightOff, 1);
  store_le64(area + kShadowOff, options.shadow ? 1 : 0);
  store_le64(area + kInodeKindOff, static_cast<std::uint64_t>(DirKind::BTree));
  region.write_bytes(inode, area);
  region.persist_barrier();
  return BTreeDirectory(region, inode);
}

BTreeDirectory BTreeDirectory::attach(PmRegion& region, Offset inode_area) {
  if (read_dir_kind(region, inode_area) != DirKind::BTree) {
    throw Error(Errc::CorruptLayout, "inode area does not hold a B+-tree directory");
  }
  return BTreeDirectory(region, inode_area);
}

BTreeDirectory::Node BTreeDirectory::read_node(Offset at) const {
  const RawNode raw{region_->view(at, kNode).data()};
  Node n;
  n.leaf = raw.leaf();
  n.next = load_le64(raw.p + 8);
  const unsigned count = raw.count();
  if (n.leaf) {
    n.entries.reserve(count + 1);
    for (unsigned i = 0; i < count; ++i) n.entries.push_back({raw.leaf_key(i), raw.leaf_name(i), raw.leaf_inode(i)});
  } else {
    n.children.reserve(count + 1);
    n.keys.reserve(count);
    for (unsigned i = 0; i < count; ++i) n.children.push_back(raw.child(i));
    for (unsigned i = 0; i + 1 < count; ++i) n.keys.push_back(raw.sep(i));
  }
  return n;
}

void BTreeDirectory::write_node(Offset at, const Node& n, bool fresh) {
  std::array<std::uint8_t, kNode> buf{};
  const std::uint8_t* old = region_->view(at, kNode).data();
  if (!fresh) std::copy_n(old, kNode, buf.begin());

  const std::uint32_t count = static_cast<std::uint32_t>(n.leaf ? n.entries.size() : n.children.size());
  store_le64(buf.data(), count | (std::uint64_t{n.leaf ? 1U : 0U} << 32));
  store_le64(buf.data() + 8, n.next);
  std::uint64_t body_end = kNodeHeader;
  std::uint64_t child_end = kChildrenOff;
  if (n.leaf) {
    for (std::size_t i = 0; i < n.entries.size(); ++i) {
      std::uint8_t* e = buf.data() + kNodeHeader + kLeafEntrySize * i;
      store_le64(e, n.entries[i].key);
      store_le64(e + 8, n.entries[i].name_ptr);
      store_le64(e + 16, n.entries[i].inode_no);
    }
    body_end += kLeafEntrySize * n.entries.size();
  } else {
    for (std::size_t i = 0; i < n.keys.size(); ++i) store_le64(buf.data() + kNodeHeader + 8 * i, n.keys[i]);
    for (std::size_t i = 0; i < n.children.size(); ++i) store_le64(buf.data() + kChildrenOff + 8 * i, n.children[i]);
    body_end += 8 * n.keys.size();
    child_end += 8 * n.children.size();
  }

  if (fresh) {
    region_->write_bytes(at, std::span<const std::uint8_t>(buf.data(), body_end));
    if (!n.leaf) {
      region_->write_bytes(at + kChildrenOff,
                           std::span<const std::uint8_t>(buf.data() + kChildrenOff, child_end - kChildrenOff));
    }
    return;
  }
  // In place: only bytes that actually change are written. Entries past the
  // new count are left stale; the count bounds them.
  const RawNode prev{old};
  const std::uint64_t prev_count = prev.count();
  write_diff(*region_, at, old, buf.data(), 0, kNodeHeader);
  if (n.leaf) {
    write_diff(*region_, at, old, buf.data(), kNodeHeader,
               std::max(body_end, kNodeHeader + kLeafEntrySize * prev_count));
  } else {
    const std::uint64_t prev_keys = prev_count == 0 ? 0 : prev_count - 1;
    write_diff(*region_, at, old, buf.data(), kNodeHeader, std::max(body_end, kNodeHeader + 8 * prev_keys));
    write_diff(*region_, at, old, buf.data(), kChildrenOff, std::max(child_end, kChildrenOff + 8 * prev_count));
  }
}

BTreeDirectory::Rewrite BTreeDirectory::store(Offset old, Node n, std::vector<Offset>& retired) {
  const bool shadow = shadowing();
  const std::size_t size = n.leaf ? n.entries.size() : n.children.size();
  const std::size_t limit = n.leaf ? kMaxLeafEntries : kMaxChildren;

  if (size <= limit) {
    if (!shadow) {
      write_node(old, n, false);
      return {old, std::nullopt, 0};
    }
    const Offset fresh = region_->alloc_block();
    write_node(fresh, n, true);
    retired.push_back(old);
    return {fresh, std::nullopt, 0};
  }

  Node right;
  right.leaf = n.leaf;
  HashKey sep;
  if (n.leaf) {
    const std::size_t keep = size / 2;
    right.entries.assign(n.entries.begin() + static_cast<std::ptrdiff_t>(keep), n.entries.end());
    n.entries.resize(keep);
    sep = right.entries.front().key;
  } else {
    const std::size_t keep = size / 2;  // children staying left
    sep = n.keys[keep - 1];
    right.children.assign(n.children.begin() + static_cast<std::ptrdiff_t>(keep), n.children.end());
    right.keys.assign(n.keys.begin() + static_cast<std::ptrdiff_t>(keep), n.keys.end());
    n.children.resize(keep);
    n.keys.resize(keep - 1);
  }

  const Offset right_at = region_->alloc_block();
  if (!shadow) {
    if (n.leaf) {
      right.next = n.next;
      n.next = right_at;
    }
    write_node(right_at, right, true);
    write_node(old, n, false);
    return {old, sep, right_at};
  }
  const Offset left_at = region_->alloc_block();
  write_node(right_at, right, true);
  write_node(left_at, n, true);
  retired.push_back(old);
  return {left_at, sep, right_at};
}

void BTreeDirectory::propagate(std::vector<Frame>& path, Rewrite r, std::vector<Offset>& retired) {
  for (std::size_t i = path.size() - 1; i-- > 0;) {
    const Offset child_was = path[i + 1].node;
    if (r.node == child_was && !r.sep) return;
    Node parent = read_node(path[i].node);
    const unsigned at = path[i].index;
    parent.children[at] = r.node;
    if (r.sep) {
      parent.keys.insert(parent.keys.begin() + at, *r.sep);
      parent.children.insert(parent.children.begin() + at + 1, r.right);
    }
    r = store(path[i].node, std::move(parent), retired);
  }
  if (r.node == path.front().node && !r.sep) return;

  Offset new_root = r.node;
  if (r.sep) {
    Node top;
    top.leaf = false;
    top.keys = {*r.sep};
    top.children = {r.node, r.right};
    new_root = region_->alloc_block();
    write_node(new_root, top, true);
    region_->write_atomic64(inode_area_ + kHeightOff, height() + 1);
  }
  region_->write_atomic64(inode_area_ + kRootOff, new_root);
}

std::vector<BTreeDirectory::Frame> BTreeDirectory::descend(HashKey key, std::uint64_t& probes) const {
  std::vector<Frame> path;
  Offset at = root();
  for (;;) {
    ++probes;
    const RawNode raw{region_->view(at, kNode).data()};
    const unsigned count = raw.count();
    if (raw.leaf()) {
      unsigned lo = 0, hi = count;
      while (lo < hi) {
        const unsigned mid = (lo + hi) / 2;
        if (raw.leaf_key(mid) < key) lo = mid + 1; else hi = mid;
      }
      path.push_back({at, lo});
      return path;
    }
    unsigned lo = 0, hi = count - 1;  // number of separators strictly below key
    while (lo < hi) {
      const unsigned mid = (lo + hi) / 2;
      if (raw.sep(mid) < key) lo = mid + 1; else hi = mid;
    }
    path.push_back({at, lo});
    at = raw.child(lo);
  }
}

bool BTreeDirectory::next_leaf(std::vector<Frame>& path, std::uint64_t& probes) const {
  path.pop_back();
  while (!path.empty()) {
    Frame& top = path.back();
    const RawNode raw{region_->view(top.node, kNode).data()};
    if (top.index + 1 < raw.count()) {
      ++top.index;
      Offset at = raw.child(top.index);
      for (;;) {
        ++probes;
        const RawNode r{region_->view(at, kNode).data()};
        path.push_back({at, 0});
        if (r.leaf()) return true;
        at = r.child(0);
      }
    }
    path.pop_back();
  }
  return false;
}

bool BTreeDirectory::seek(std::vector<Frame>& path, HashKey key, std::string_view name,
                          std::uint64_t& probes) const {
  path = descend(key, probes);
  for (;;) {
    Frame& leaf = path.back();
    const RawNode raw{region_->view(leaf.node, kNode).data()};
    const unsigned count = raw.count();
    for (unsigned i = leaf.index; i < count; ++i) {
      const HashKey k = raw.leaf_key(i);
      if (k > key) return false;
      if (k == key && name_view(*region_, raw.leaf_name(i)) == name) {
        leaf.index = i;
        return true;
      }
    }
    if (!next_leaf(path, probes)) return false;
  }
}

std::optional<InodeNo> BTreeDirectory::bt_lookup(HashKey key, std::string_view name) const {
  std::vector<Frame> path;
  std::uint64_t probes = 0;
  const bool hit = seek(path, key, name, probes);
  probes_->record(probes);
  if (!hit) return std::nullopt;
  return RawNode{region_->view(path.back().node, kNode).data()}.leaf_inode(path.back().index);
}

void BTreeDirectory::bt_insert(HashKey key, Offset name_ptr, InodeNo inode_no) {
  std::uint64_t probes = 0;
  std::vector<Frame> path = descend(key, probes);
  Node leaf = read_node(path.back().node);
  leaf.entries.insert(leaf.entries.begin() + path.back().index, {key, name_ptr, inode_no});

  std::vector<Offset> retired;
  propagate(path, store(path.back().node, std::move(leaf), retired), retired);
  region_->write_atomic64(inode_area_ + kSizeOff, size() + 1);
  for (Offset old : retired) region_->free_block(old);
  region_->persist_barrier();
}

void BTreeDirectory::bt_delete(HashKey key, std::string_view name) {
  std::vector<Frame> path;
  std::uint64_t probes = 0;
  const bool hit = seek(path, key, name, probes);
  probes_->record(probes);
  if (!hit) throw Error(Errc::NotFound, std::string(name));

  Node leaf = read_node(path.back().node);
  leaf.entries.erase(leaf.entries.begin() + path.back().index);
  std::vector<Offset> retired;
  propagate(path, store(path.back().node, std::move(leaf), retired), retired);
  region_->write_atomic64(inode_area_ + kSizeOff, size() - 1);
  for (Offset old : retired) region_->free_block(old);
  region_->persist_barrier();
}

std::optional<InodeNo> BTreeDirectory::find(std::string_view name) const {
  return bt_lookup(hash_name(name), name);
}

void BTreeDirectory::create(std::string_view name, InodeNo inode_no) {
  const HashKey key = hash_name(name);
  if (bt_lookup(key, name)) throw Error(Errc::AlreadyExists, std::string(name));
  bt_insert(key, append_name(*region_, name), inode_no);
}

void BTreeDirectory::remove(std::string_view name) { bt_delete(hash_name(name), name); }

std::vector<DirEntry> BTreeDirectory::readdir() const {
  std::vector<DirEntry> out;
  std::function<void(Offset)> visit = [&](Offset at) {
    const RawNode raw{region_->view(at, kNode).data()};
    if (raw.leaf()) {
      for (unsigned i = 0; i < raw.count(); ++i) {
        out.push_back({std::string(name_view(*region_, raw.leaf_name(i))), raw.leaf_inode(i)});
      }
      return;
    }
    for (unsigned i = 0; i < raw.count(); ++i) visit(raw.child(i));
  };
  visit(root());
  return out;
}

std::uint64_t BTreeDirectory::aux_bytes() const {
  std::uint64_t internal = 0;
  std::function<void(Offset)> visit = [&](Offset at) {
    const RawNode raw{region_->view(at, kNode).data()};
    if (raw.leaf()) return;
    ++internal;
    for (unsigned i = 0; i < raw.count(); ++i) visit(raw.child(i));
  };
  visit(root());
  return internal * kNode;
}

std::vector<std::string> BTreeDirectory::validate(bool check_occupancy) const {
  std::vector<std::string> bad;
  std::vector<Offset> leaves;
  std::uint64_t entries = 0;
  const std::uint64_t h = height();

  std::function<void(Offset, std::uint64_t, std::optional<HashKey>, std::optional<HashKey>)> visit =
      [&](Offset at, std::uint64_t depth, std::optional<HashKey> lo, std::optional<HashKey> hi) {
        const RawNode raw{region_->view(at, kNode).data()};
        const std::string where = "node " + std::to_string(at);
        const unsigned count = raw.count();
        const bool is_root = depth == 1;
        if (raw.leaf()) {
          leaves.push_back(at);
          entries += count;
          if (depth != h) bad.push_back(where + ": leaf at depth " + std::to_string(depth));
          if (count > kMaxLeafEntries) bad.push_back(where + ": overfull leaf");
          if (check_occupancy && !is_root && count < kMinOccupancy) bad.push_back(where + ": underfull leaf");
          for (unsigned i = 0; i < count; ++i) {
            const HashKey k = raw.leaf_key(i);
            if (i > 0 && raw.leaf_key(i - 1) > k) bad.push_back(where + ": leaf keys out of order");
            if ((lo && k < *lo) || (hi && k > *hi)) bad.push_back(where + ": leaf key outside parent bounds");
            try {
              (void)name_view(*region_, raw.leaf_name(i));
            } catch (const Error& e) {
              bad.push_back(where + ": " + e.what());
            }
          }
          return;
        }
        if (count < 2 || count > kMaxChildren) bad.push_back(where + ": bad child count " + std::to_string(count));
        if (check_occupancy && !is_root && count < kMinOccupancy) bad.push_back(where + ": underfull internal node");
        for (unsigned i = 0; i + 1 < count; ++i) {
          const HashKey k = raw.sep(i);
          if (i > 0 && raw.sep(i - 1) > k) bad.push_back(where + ": separators out of order");
          if ((lo && k < *lo) || (hi && k > *hi)) bad.push_back(where + ": separator outside parent bounds");
        }
        for (unsigned i = 0; i < count; ++i) {
          const auto clo = i == 0 ? lo : std::optional<HashKey>(raw.sep(i - 1));
          const auto chi = i + 1 == count ? hi : std::optional<HashKey>(raw.sep(i));
          visit(raw.child(i), depth + 1, clo, chi);
        }
      };
  visit(root(), 1, std::nullopt, std::nullopt);

  if (entries != size()) bad.push_back("entry count field disagrees with leaves");
  if (!shadowing()) {
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      const Offset want = i + 1 < leaves.size() ? leaves[i + 1] : 0;
      if (region_->read_u64(leaves[i] + 8) != want) {
        bad.push_back("leaf " + std::to_string(leaves[i]) + ": broken sibling link");
      }
    }
  }
  return bad;
}

}  // namespace cib
