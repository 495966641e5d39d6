#include "npusim/address_space.hpp"

#include <algorithm>

namespace npusim {

std::string to_string(PageSize ps) { return ps == PageSize::Small4K ? "4k" : "2m"; }

PageSize parse_page_size(const std::string &s)
{
    if (s == "4k" || s == "4K" || s == "4KB")
        return PageSize::Small4K;
    if (s == "2m" || s == "2M" || s == "2MB")
        return PageSize::Large2M;
    throw SimError("unknown page size '" + s + "' (expected 4k or 2m)");
}

std::uint16_t PageIndices::at_level(int level) const
{
    switch (level) {
    case 4: return l4;
    case 3: return l3;
    case 2: return l2;
    case 1:
        if (!l1)
            throw SimError("level-1 index requested for a 2MB page split");
        return *l1;
    default: throw SimError("radix level out of range: " + std::to_string(level));
    }
}

PageIndices decompose(VirtAddr va, PageSize ps)
{
    const std::uint64_t v = va.value;
    const std::uint64_t mask = kEntriesPerNode - 1;
    PageIndices idx;
    idx.l4 = static_cast<std::uint16_t>((v >> 39) & mask);
    idx.l3 = static_cast<std::uint16_t>((v >> 30) & mask);
    idx.l2 = static_cast<std::uint16_t>((v >> 21) & mask);
    if (ps == PageSize::Small4K)
        idx.l1 = static_cast<std::uint16_t>((v >> 12) & mask);
    idx.offset = static_cast<std::uint32_t>(v & (page_bytes(ps) - 1));
    return idx;
}

VirtAddr compose(const PageIndices &idx, PageSize ps)
{
    auto check = [](std::uint64_t i, const char *what) {
        if (i >= kEntriesPerNode)
            throw SimError(std::string("page index ") + what + " out of range: " + std::to_string(i));
    };
    check(idx.l4, "l4");
    check(idx.l3, "l3");
    check(idx.l2, "l2");
    if (idx.offset >= page_bytes(ps))
        throw SimError("page offset out of range: " + std::to_string(idx.offset));

    std::uint64_t v = (std::uint64_t{idx.l4} << 39) | (std::uint64_t{idx.l3} << 30) | (std::uint64_t{idx.l2} << 21);
    if (ps == PageSize::Small4K) {
        if (!idx.l1)
            throw SimError("4KB page split requires an l1 index");
        check(*idx.l1, "l1");
        v |= std::uint64_t{*idx.l1} << 12;
    } else if (idx.l1) {
        throw SimError("2MB page split has no l1 index");
    }
    return VirtAddr(v | idx.offset);
}

std::string Segment::name() const
{
    switch (kind) {
    case SegmentKind::InputActivations: return "IA";
    case SegmentKind::Weights: return "W";
    case SegmentKind::OutputActivations: return "OA";
    case SegmentKind::EmbeddingTable: return "EMB" + std::to_string(table_id);
    }
    return "?";
}

VirtAddr default_segment_base(unsigned slot)
{
    const std::uint64_t tb = std::uint64_t{1} << 40;
    if (slot + 1 >= (std::uint64_t{1} << (kAddressBits - 40)))
        throw SimError("segment slot out of range: " + std::to_string(slot));
    return VirtAddr((slot + 1) * tb);
}

const Segment &AddressLayout::add(const Segment &seg)
{
    if (seg.length == 0)
        throw SimError("segment " + seg.name() + " has zero length");
    if (seg.base.value + seg.length > kAddressMask)
        throw SimError("segment " + seg.name() + " crosses the 48-bit address limit");
    for (const auto &s : segments_) {
        const bool disjoint = seg.base.value + seg.length <= s.base.value || s.base.value + s.length <= seg.base.value;
        if (!disjoint)
            throw SimError("segment " + seg.name() + " overlaps segment " + s.name());
    }
    segments_.push_back(seg);
    return segments_.back();
}

const Segment &AddressLayout::add_at_slot(SegmentKind kind, unsigned slot, std::uint64_t length, std::uint32_t table_id)
{
    return add(Segment{kind, table_id, default_segment_base(slot), length});
}

const Segment *AddressLayout::find(VirtAddr va) const
{
    auto it = std::find_if(segments_.begin(), segments_.end(), [&](const Segment &s) { return s.contains(va); });
    return it == segments_.end() ? nullptr : &*it;
}

const Segment *AddressLayout::find(SegmentKind kind, std::uint32_t table_id) const
{
    auto it = std::find_if(segments_.begin(), segments_.end(),
                           [&](const Segment &s) { return s.kind == kind && s.table_id == table_id; });
    return it == segments_.end() ? nullptr : &*it;
}

} // namespace npusim
