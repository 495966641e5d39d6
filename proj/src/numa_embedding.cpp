#include "npusim/numa_embedding.hpp"

#include <algorithm>
#include <queue>
#include <unordered_map>

#include "npusim/npu_core.hpp"

namespace npusim {

std::string to_string(NumaStrategy s)
{
    switch (s) {
    case NumaStrategy::BaselineCopy: return "baseline_copy";
    case NumaStrategy::NumaSlow: return "numa_slow";
    case NumaStrategy::NumaFast: return "numa_fast";
    case NumaStrategy::DemandPaging: return "demand_paging";
    }
    return "?";
}

NumaStrategy parse_numa_strategy(const std::string &s)
{
    if (s == "baseline_copy")
        return NumaStrategy::BaselineCopy;
    if (s == "numa_slow")
        return NumaStrategy::NumaSlow;
    if (s == "numa_fast")
        return NumaStrategy::NumaFast;
    if (s == "demand_paging")
        return NumaStrategy::DemandPaging;
    throw SimError("unknown numa strategy '" + s +
                   "' (expected baseline_copy, numa_slow, numa_fast or demand_paging)");
}

GatherWorkload GatherWorkload::make(EmbeddingModel model, Placement placement, unsigned first_slot)
{
    for (const auto &t : model.tables)
        if (t.embedding_bytes > 4096 || (t.embedding_bytes & (t.embedding_bytes - 1)) != 0)
            throw SimError("embedding_bytes must be a power of two <= 4096 so rows never straddle a page");
    GatherWorkload wl;
    wl.trace = gather_trace(model, placement);
    wl.layout = embedding_layout(model, first_slot);
    wl.model = std::move(model);
    wl.placement = std::move(placement);
    return wl;
}

namespace {

FrameNumber region_first_frame(std::uint32_t npu, PageSize ps)
{
    return (std::uint64_t{npu} << kNpuRegionShift) >> offset_bits(ps);
}

void check_self(const GatherWorkload &wl, const NumaConfig &cfg)
{
    if (cfg.self_npu >= wl.placement.num_npus)
        throw SimError("numa self_npu is not part of the placement");
    if (wl.placement.num_npus >= 255)
        throw SimError("at most 254 NPUs fit in the physical address map");
}

/// This NPU's page table: every touched local page, plus touched remote
/// pages (mapped into the owner's region) when `map_remote`.
PageTable build_view(const GatherWorkload &wl, const NumaConfig &cfg, bool map_remote,
                     std::vector<FrameNumber> &next_frame)
{
    const PageSize ps = cfg.page_size;
    PageTable pt(ps);
    next_frame.assign(wl.placement.num_npus, 0);
    for (std::uint32_t k = 0; k < wl.placement.num_npus; ++k)
        next_frame[k] = region_first_frame(k, ps);
    for (const auto &g : wl.trace[cfg.self_npu]) {
        if (g.owner != cfg.self_npu && !map_remote)
            continue;
        const Vpn v = vpn_of(gather_va(wl.layout, wl.model, g), ps);
        if (!pt.lookup(v))
            pt.map_page_at(v, next_frame[g.owner]++);
    }
    return pt;
}

// Issues gathers at one translation per cycle and moves each embedding from
// wherever its frame lives. Faults go to a single serial handler when
// demand paging is configured; otherwise they abort the run.
class GatherEngine {
  public:
    struct DemandPaging {
        PageTable *pt;
        Link *link;
        Cycle overhead;
        FrameNumber *next_local_frame;
    };

    GatherEngine(const GatherWorkload &wl, const NumaConfig &cfg, Mmu &mmu, Dram &dram, Link *remote,
                 std::optional<DemandPaging> dp = std::nullopt)
        : wl_(wl), cfg_(cfg), mmu_(mmu), dram_(dram), remote_(remote), dp_(dp)
    {
    }

    /// Returns the cycle the last embedding arrived (`start` if none).
    Cycle execute(const std::vector<const Gather *> &gathers, Cycle start, LatencyBreakdown &b)
    {
        const PageSize ps = cfg_.page_size;
        using Retry = std::pair<Cycle, std::uint32_t>;
        std::priority_queue<Retry, std::vector<Retry>, std::greater<>> retries;
        std::unordered_map<std::uint64_t, std::uint32_t> inflight;
        std::size_t next = 0;
        std::size_t remaining = gathers.size();
        Cycle now = start;
        Cycle end = start;
        std::uint64_t id = mmu_.next_request_id();

        auto deliver = [&](const TranslationCompletion &c) {
            const std::uint32_t gi = inflight.at(c.id);
            inflight.erase(c.id);
            const Gather &g = *gathers[gi];
            if (c.fault()) {
                ++b.faults;
                if (!dp_)
                    throw TranslationFault(vpn_base(c.vpn, ps), c.fault_level);
                retries.push({handle_fault(c, b), gi});
                return;
            }
            const std::uint32_t bytes = wl_.model.tables[g.table].embedding_bytes;
            Cycle at = c.cycle;
            if (auto it = ready_.find(c.vpn); it != ready_.end())
                at = std::max(at, it->second); // page still in flight from its owner
            const std::uint64_t off = gather_va(wl_.layout, wl_.model, g).value & (page_bytes(ps) - 1);
            const PhysAddr pa((*c.frame << offset_bits(ps)) | off);
            Cycle done;
            if ((pa.value >> kNpuRegionShift) == cfg_.self_npu) {
                done = dram_.read(pa, bytes, at);
            } else {
                if (!remote_)
                    throw SimError("remote frame reached without a remote link");
                done = remote_->transfer(bytes, at);
            }
            end = std::max(end, done);
            --remaining;
        };

        while (remaining > 0) {
            for (const auto &c : mmu_.tick(now))
                deliver(c);
            if (remaining == 0)
                break;

            std::optional<std::uint32_t> pick;
            const bool retry = !retries.empty() && retries.top().first <= now;
            if (retry)
                pick = retries.top().second;
            else if (next < gathers.size())
                pick = static_cast<std::uint32_t>(next);

            if (pick) {
                const Vpn v = vpn_of(gather_va(wl_.layout, wl_.model, *gathers[*pick]), ps);
                const auto r = mmu_.submit(TranslationRequest{id, v, now, RequestOrigin::EmbeddingGather}, now);
                if (r.accepted()) {
                    inflight[id++] = *pick;
                    if (retry)
                        retries.pop();
                    else
                        ++next;
                    ++now;
                    continue;
                }
                const auto ev = mmu_.next_event_cycle();
                if (!ev)
                    throw SimError("gather blocked with no pending translations");
                const Cycle target = std::max(now + 1, *ev);
                mmu_.add_blocked_cycles(target - now - 1);
                now = target;
                continue;
            }

            std::optional<Cycle> wake = mmu_.next_event_cycle();
            if (!retries.empty())
                wake = wake ? std::min(*wake, retries.top().first) : retries.top().first;
            if (!wake)
                throw SimError("gathers outstanding with nothing scheduled");
            now = std::max(now + 1, *wake);
        }
        return end;
    }

  private:
    // Serial handler: software overhead, whole-page migration, map, retry.
    Cycle handle_fault(const TranslationCompletion &c, LatencyBreakdown &b)
    {
        if (auto it = ready_.find(c.vpn); it != ready_.end())
            return std::max(c.cycle, it->second); // already migrating or migrated
        const std::uint64_t bytes = page_bytes(cfg_.page_size);
        const Cycle start = std::max(handler_free_, c.cycle);
        const Cycle move = start + dp_->overhead;
        const Cycle done = dp_->link->transfer(bytes, move);
        handler_free_ = done;
        dp_->pt->map_page_at(c.vpn, (*dp_->next_local_frame)++);
        mmu_.invalidate(c.vpn);
        ready_[c.vpn] = done;
        b.fault_handling += done - start;
        b.migration_cycles += done - move;
        b.migration_bytes += bytes;
        ++b.migrations;
        return done;
    }

    const GatherWorkload &wl_;
    const NumaConfig &cfg_;
    Mmu &mmu_;
    Dram &dram_;
    Link *remote_;
    std::optional<DemandPaging> dp_;
    std::unordered_map<Vpn, Cycle> ready_;
    Cycle handler_free_ = 0;
};

struct Split {
    std::vector<const Gather *> local, remote;
};

Split split(const GatherWorkload &wl, const NumaConfig &cfg, LatencyBreakdown &b)
{
    Split s;
    for (const auto &g : wl.trace[cfg.self_npu]) {
        const std::uint64_t bytes = wl.model.tables[g.table].embedding_bytes;
        b.payload_bytes += bytes;
        if (g.owner == cfg.self_npu) {
            s.local.push_back(&g);
            ++b.local_gathers;
        } else {
            s.remote.push_back(&g);
            b.remote_payload_bytes += bytes;
            ++b.remote_gathers;
        }
    }
    return s;
}

} // namespace

LatencyBreakdown run_baseline_copy(const GatherWorkload &wl, const NumaConfig &cfg)
{
    check_self(wl, cfg);
    LatencyBreakdown b;
    const Split s = split(wl, cfg, b);

    // local gathers need no translation overhead here: the copy baseline runs without an NPU MMU
    std::vector<FrameNumber> frames;
    const PageTable pt = build_view(wl, cfg, false, frames);
    Mmu mmu(MmuConfig::oracle(), pt);
    Dram dram(cfg.dram);
    GatherEngine engine(wl, cfg, mmu, dram, nullptr);
    const Cycle t0 = engine.execute(s.local, 0, b);
    b.local = t0;

    Link leg1(cfg.pcie), leg2(cfg.pcie);
    Dram cpu(cfg.cpu_dram);
    Cycle t = t0;
    auto copy = [&](std::uint64_t bytes) {
        const Cycle t1 = leg1.transfer(bytes, t);
        const Cycle t2 = cpu.issue(bytes, t1);
        const Cycle t3 = cpu.issue(bytes, t2);
        const Cycle t4 = leg2.transfer(bytes, t3);
        b.remote_leg1 += t1 - t;
        b.staging += t3 - t1;
        b.remote_leg2 += t4 - t3;
        t = t4;
    };
    if (cfg.per_embedding_copy) {
        for (const Gather *g : s.remote)
            copy(wl.model.tables[g->table].embedding_bytes);
    } else if (b.remote_payload_bytes > 0) {
        copy(b.remote_payload_bytes);
    }
    b.total = t;
    b.mmu = mmu.stats();
    return b;
}

LatencyBreakdown run_numa(const GatherWorkload &wl, const NumaConfig &cfg, LinkKind kind)
{
    check_self(wl, cfg);
    LatencyBreakdown b;
    const Split s = split(wl, cfg, b);
    std::vector<FrameNumber> frames;
    const PageTable pt = build_view(wl, cfg, true, frames);
    Dram dram(cfg.dram);
    Mmu mmu(cfg.mmu, pt, cfg.dram.charge_walk_bandwidth ? &dram : nullptr);
    Link link(kind == LinkKind::PcieCpuNpu ? cfg.pcie : cfg.nvlink);
    GatherEngine engine(wl, cfg, mmu, dram, &link);
    const Cycle t0 = engine.execute(s.local, 0, b);
    const Cycle t1 = engine.execute(s.remote, t0, b);
    b.local = t0;
    b.remote = t1 - t0;
    b.total = t1;
    b.mmu = mmu.stats();
    return b;
}

DemandPagingSession::DemandPagingSession(const GatherWorkload &wl, NumaConfig cfg)
    : wl_(wl), cfg_((check_self(wl, cfg), cfg)), pt_(build_view(wl, cfg_, false, next_frame_)), dram_(cfg_.dram),
      mmu_(cfg_.mmu, pt_, cfg_.dram.charge_walk_bandwidth ? &dram_ : nullptr),
      migration_(cfg_.migration_link == LinkKind::PcieCpuNpu ? cfg_.pcie : cfg_.nvlink)
{
}

LatencyBreakdown DemandPagingSession::run()
{
    LatencyBreakdown b;
    const Split s = split(wl_, cfg_, b);
    const TranslationStats before = mmu_.stats();
    GatherEngine engine(wl_, cfg_, mmu_, dram_, nullptr,
                        GatherEngine::DemandPaging{&pt_, &migration_, cfg_.fault_overhead,
                                                   &next_frame_[cfg_.self_npu]});
    const Cycle start = clock_;
    const Cycle t0 = engine.execute(s.local, start, b);
    const Cycle t1 = engine.execute(s.remote, t0, b);
    b.local = t0 - start;
    b.remote = t1 - t0;
    b.total = t1 - start;
    b.mmu = mmu_.stats();
    b.mmu -= before;
    clock_ = t1;
    return b;
}

LatencyBreakdown run_demand_paging(const GatherWorkload &wl, const NumaConfig &cfg)
{
    DemandPagingSession session(wl, cfg);
    return session.run();
}

LatencyBreakdown run_strategy(NumaStrategy s, const GatherWorkload &wl, const NumaConfig &cfg)
{
    switch (s) {
    case NumaStrategy::BaselineCopy: return run_baseline_copy(wl, cfg);
    case NumaStrategy::NumaSlow: return run_numa(wl, cfg, LinkKind::PcieCpuNpu);
    case NumaStrategy::NumaFast: return run_numa(wl, cfg, LinkKind::NvlinkNpuNpu);
    case NumaStrategy::DemandPaging: return run_demand_paging(wl, cfg);
    }
    throw SimError("bad numa strategy");
}

} // namespace npusim
