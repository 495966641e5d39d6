#pragma once

// 48-bit x86-64 style virtual/physical addresses and the radix index split
// used by the page table and the MMU translation-path caches.

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "npusim/common.hpp"

namespace npusim {

inline constexpr unsigned kAddressBits = 48;
inline constexpr std::uint64_t kAddressMask = (std::uint64_t{1} << kAddressBits) - 1;
inline constexpr unsigned kIndexBits = 9;
inline constexpr std::uint64_t kEntriesPerNode = std::uint64_t{1} << kIndexBits;

/// Virtual address. Bits 48-63 are dropped on construction.
struct VirtAddr {
    std::uint64_t value = 0;

    constexpr VirtAddr() = default;
    constexpr explicit VirtAddr(std::uint64_t v) : value(v & kAddressMask) {}

    constexpr VirtAddr operator+(std::uint64_t off) const { return VirtAddr(value + off); }
    friend constexpr auto operator<=>(const VirtAddr &, const VirtAddr &) = default;
};

struct PhysAddr {
    std::uint64_t value = 0;

    constexpr PhysAddr() = default;
    constexpr explicit PhysAddr(std::uint64_t v) : value(v & kAddressMask) {}

    constexpr PhysAddr operator+(std::uint64_t off) const { return PhysAddr(value + off); }
    friend constexpr auto operator<=>(const PhysAddr &, const PhysAddr &) = default;
};

enum class PageSize : std::uint8_t { Small4K, Large2M };

constexpr unsigned offset_bits(PageSize ps) { return ps == PageSize::Small4K ? 12 : 21; }
constexpr std::uint64_t page_bytes(PageSize ps) { return std::uint64_t{1} << offset_bits(ps); }
/// Radix level holding the leaf entry: L1 for 4KB pages, L2 for 2MB pages.
constexpr int leaf_level(PageSize ps) { return ps == PageSize::Small4K ? 1 : 2; }
/// Number of levels a full walk reads (4 or 3).
constexpr int walk_depth(PageSize ps) { return 5 - leaf_level(ps); }

std::string to_string(PageSize ps);
PageSize parse_page_size(const std::string &s);

struct PageIndices {
    std::uint16_t l4 = 0;
    std::uint16_t l3 = 0;
    std::uint16_t l2 = 0;
    std::optional<std::uint16_t> l1; // absent for 2MB pages
    std::uint32_t offset = 0;

    /// Index used at radix level 4..1. Level 1 of a 2MB split is an error.
    std::uint16_t at_level(int level) const;

    friend bool operator==(const PageIndices &, const PageIndices &) = default;
};

PageIndices decompose(VirtAddr va, PageSize ps);
/// Inverse of decompose. Throws SimError if an index or the offset is out of range.
VirtAddr compose(const PageIndices &idx, PageSize ps);

constexpr Vpn vpn_of(VirtAddr va, PageSize ps) { return va.value >> offset_bits(ps); }
constexpr VirtAddr vpn_base(Vpn vpn, PageSize ps) { return VirtAddr(vpn << offset_bits(ps)); }

enum class SegmentKind : std::uint8_t { InputActivations, Weights, OutputActivations, EmbeddingTable };

struct Segment {
    SegmentKind kind = SegmentKind::InputActivations;
    std::uint32_t table_id = 0; // only meaningful for EmbeddingTable
    VirtAddr base;
    std::uint64_t length = 0;

    VirtAddr end() const { return VirtAddr(base.value + length); }
    bool contains(VirtAddr va) const { return va >= base && va.value < base.value + length; }
    std::string name() const;
};

/// Default segment base for layout slot `slot`: slots are 1TB apart, starting at 1TB,
/// so distinct segments never share an L4 entry.
VirtAddr default_segment_base(unsigned slot);

/// Non-overlapping set of segments in the 48-bit virtual address space.
class AddressLayout {
  public:
    /// Throws SimError on overlap, zero length, or a segment crossing 2^48.
    const Segment &add(const Segment &seg);
    const Segment &add_at_slot(SegmentKind kind, unsigned slot, std::uint64_t length, std::uint32_t table_id = 0);

    const std::vector<Segment> &segments() const { return segments_; }
    const Segment *find(VirtAddr va) const;
    const Segment *find(SegmentKind kind, std::uint32_t table_id = 0) const;

  private:
    std::vector<Segment> segments_;
};

} // namespace npusim
