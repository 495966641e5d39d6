#include "npusim/page_table.hpp"

#include <algorithm>
#include <unordered_set>
#include <utility>

#include "npusim/rng.hpp"

namespace npusim {

PageTable::PageTable(PageSize ps, FrameAllocation alloc) : page_size_(ps), next_frame_(alloc.first_frame)
{
    new_node(4);
}

std::uint32_t PageTable::new_node(int level)
{
    nodes_.emplace_back();
    node_level_.push_back(static_cast<std::uint8_t>(level));
    return static_cast<std::uint32_t>(nodes_.size() - 1);
}

std::size_t PageTable::node_count_at_level(int level) const
{
    return static_cast<std::size_t>(std::count(node_level_.begin(), node_level_.end(), level));
}

PageTable PageTable::build(const std::vector<Segment> &segments, PageSize ps, FrameAllocation alloc)
{
    AddressLayout check;
    for (const auto &s : segments)
        check.add(s);

    PageTable pt(ps, alloc);
    std::vector<Vpn> vpns;
    for (const auto &s : segments) {
        const Vpn first = vpn_of(s.base, ps);
        const Vpn last = vpn_of(VirtAddr(s.base.value + s.length - 1), ps);
        for (Vpn v = first; v <= last; ++v)
            vpns.push_back(v);
    }
    // Unaligned neighbours may share a boundary page.
    std::unordered_set<Vpn> seen;
    std::erase_if(vpns, [&](Vpn v) { return !seen.insert(v).second; });

    std::vector<FrameNumber> frames(vpns.size());
    for (std::size_t i = 0; i < frames.size(); ++i)
        frames[i] = alloc.first_frame + i;
    if (alloc.policy == FramePolicy::ShuffledSeeded && frames.size() > 1) {
        Rng rng(alloc.seed);
        for (std::size_t i = frames.size() - 1; i > 0; --i)
            std::swap(frames[i], frames[rng.below(i + 1)]);
    }
    for (std::size_t i = 0; i < vpns.size(); ++i)
        pt.map_page_at(vpns[i], frames[i]);
    pt.next_frame_ = alloc.first_frame + vpns.size();
    return pt;
}

std::uint32_t PageTable::leaf_node_for(Vpn vpn)
{
    const PageIndices idx = decompose(vpn_base(vpn, page_size_), page_size_);
    std::uint32_t node = 0;
    for (int level = 4; level > leaf_level(page_size_); --level) {
        const std::uint16_t i = idx.at_level(level);
        PageTableEntry e = nodes_[node][i];
        if (!e.present()) {
            const std::uint32_t child = new_node(level - 1);
            nodes_[node][i] = PageTableEntry::table(child);
            node = child;
        } else {
            if (e.is_leaf())
                throw SimError("page table: level-" + std::to_string(level) + " entry is already a leaf");
            node = static_cast<std::uint32_t>(e.target());
        }
    }
    return node;
}

FrameNumber PageTable::map_page(Vpn vpn)
{
    const FrameNumber f = next_frame_;
    map_page_at(vpn, f);
    next_frame_ = f + 1;
    return f;
}

void PageTable::map_page_at(Vpn vpn, FrameNumber frame)
{
    if (vpn > (kAddressMask >> offset_bits(page_size_)))
        throw SimError("vpn out of the 48-bit range");
    const std::uint32_t node = leaf_node_for(vpn);
    const std::uint16_t i = decompose(vpn_base(vpn, page_size_), page_size_).at_level(leaf_level(page_size_));
    if (nodes_[node][i].present())
        throw SimError("page table: vpn " + std::to_string(vpn) + " is already mapped");
    nodes_[node][i] = PageTableEntry::leaf(frame);
    ++leaf_count_;
}

void PageTable::unmap_page(Vpn vpn)
{
    const auto steps = trace(vpn_base(vpn, page_size_));
    const WalkStep &last = steps.back();
    if (!last.entry.present() || !last.entry.is_leaf())
        throw SimError("page table: vpn " + std::to_string(vpn) + " is not mapped");
    const std::uint16_t i = decompose(vpn_base(vpn, page_size_), page_size_).at_level(last.level);
    nodes_[last.node_id][i] = PageTableEntry{};
    --leaf_count_;
}

std::vector<WalkStep> PageTable::trace(VirtAddr va) const
{
    const PageIndices idx = decompose(va, page_size_);
    std::vector<WalkStep> steps;
    steps.reserve(4);
    std::uint32_t node = 0;
    for (int level = 4; level >= leaf_level(page_size_); --level) {
        const std::uint16_t i = idx.at_level(level);
        const PageTableEntry e = nodes_[node][i];
        steps.push_back(WalkStep{level, node, node_addr(node) + std::uint64_t{i} * kPteBytes, e});
        if (!e.present() || e.is_leaf())
            break;
        node = static_cast<std::uint32_t>(e.target());
    }
    return steps;
}

WalkOutcome PageTable::walk_reference(VirtAddr va) const
{
    const auto steps = trace(va);
    const WalkStep &last = steps.back();
    if (!last.entry.present() || !last.entry.is_leaf())
        return PageFault{va, last.level};

    WalkResult r;
    r.frame = last.entry.target();
    r.pa = PhysAddr((r.frame << offset_bits(page_size_)) | (va.value & (page_bytes(page_size_) - 1)));
    r.levels_touched = static_cast<int>(steps.size());
    r.touched_node_addrs.reserve(steps.size());
    for (const auto &s : steps)
        r.touched_node_addrs.push_back(s.pte_addr);
    return r;
}

std::optional<FrameNumber> PageTable::lookup(Vpn vpn) const
{
    const PageIndices idx = decompose(vpn_base(vpn, page_size_), page_size_);
    std::uint32_t node = 0;
    for (int level = 4; level >= leaf_level(page_size_); --level) {
        const PageTableEntry e = nodes_[node][idx.at_level(level)];
        if (!e.present())
            return std::nullopt;
        if (e.is_leaf())
            return e.target();
        node = static_cast<std::uint32_t>(e.target());
    }
    return std::nullopt;
}

} // namespace npusim
