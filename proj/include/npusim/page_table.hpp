#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "npusim/address_space.hpp"

namespace npusim {

/// Page-table nodes live in their own physical region, above every data frame
/// any NPU region can hand out, so PTE addresses never alias data.
inline constexpr std::uint64_t kNodeRegionBase = 0xFF00'0000'0000ULL;
inline constexpr std::uint64_t kPteBytes = 8;

enum class FramePolicy : std::uint8_t { Sequential, ShuffledSeeded };

struct FrameAllocation {
    FramePolicy policy = FramePolicy::Sequential;
    std::uint64_t seed = 0;
    FrameNumber first_frame = 0; // in page-size units
};

/// One x86-style entry: bit0 present, bit1 leaf, bits 12.. target
/// (frame number for a leaf, child node id otherwise).
struct PageTableEntry {
    std::uint64_t raw = 0;

    static constexpr PageTableEntry leaf(FrameNumber frame) { return {(frame << 12) | 0x3}; }
    static constexpr PageTableEntry table(std::uint32_t node) { return {(std::uint64_t{node} << 12) | 0x1}; }

    constexpr bool present() const { return raw & 0x1; }
    constexpr bool is_leaf() const { return raw & 0x2; }
    constexpr std::uint64_t target() const { return raw >> 12; }
};

/// One PTE read by a walk.
struct WalkStep {
    int level = 4;
    std::uint32_t node_id = 0;
    PhysAddr pte_addr;
    PageTableEntry entry;
};

struct WalkResult {
    PhysAddr pa;
    FrameNumber frame = 0;
    int levels_touched = 0;
    std::vector<PhysAddr> touched_node_addrs; // PTE addresses, root first
};

struct PageFault {
    VirtAddr va;
    int level = 4; // level whose entry was absent
};

using WalkOutcome = std::variant<WalkResult, PageFault>;

/// 4-level radix page table for one page size. Not internally synchronized:
/// a single writer, concurrent const walks between mutations.
class PageTable {
  public:
    explicit PageTable(PageSize ps = PageSize::Small4K, FrameAllocation alloc = {});

    /// Maps every page touched by `segments`. Throws SimError on overlap.
    static PageTable build(const std::vector<Segment> &segments, PageSize ps, FrameAllocation alloc = {});

    PageSize page_size() const { return page_size_; }

    /// Maps `vpn` to the next frame from the allocator. Throws on double map.
    FrameNumber map_page(Vpn vpn);
    /// Maps `vpn` to an explicit frame. Throws on double map.
    void map_page_at(Vpn vpn, FrameNumber frame);
    /// Throws if `vpn` is not mapped. Interior nodes are kept.
    void unmap_page(Vpn vpn);

    /// Reference walk; the correctness oracle for every MMU configuration.
    WalkOutcome walk_reference(VirtAddr va) const;
    /// PTEs a full walk reads for `va`, root first, ending at the leaf or the
    /// first absent entry.
    std::vector<WalkStep> trace(VirtAddr va) const;
    /// Fast leaf lookup without recording the path.
    std::optional<FrameNumber> lookup(Vpn vpn) const;

    PhysAddr node_addr(std::uint32_t node) const { return PhysAddr(kNodeRegionBase + std::uint64_t{node} * 4096); }
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t node_count_at_level(int level) const;
    std::size_t leaf_count() const { return leaf_count_; }

  private:
    using Node = std::array<PageTableEntry, kEntriesPerNode>;

    std::uint32_t new_node(int level);
    /// Leaf-level node for `vpn`, allocating interior nodes on the way.
    std::uint32_t leaf_node_for(Vpn vpn);

    PageSize page_size_;
    std::vector<Node> nodes_;
    std::vector<std::uint8_t> node_level_;
    std::size_t leaf_count_ = 0;
    FrameNumber next_frame_;
};

} // namespace npusim
