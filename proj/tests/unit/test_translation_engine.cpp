#include <doctest.h>

#include <map>
#include <variant>

#include "npusim/rng.hpp"
#include "npusim/translation_engine.hpp"

using namespace npusim;

namespace {

constexpr Vpn kBase = (1ULL << 40) >> 12; // first VPN of segment slot 0

PageTable table_for(std::uint64_t pages, PageSize ps = PageSize::Small4K)
{
    return PageTable::build({{SegmentKind::Weights, 0, default_segment_base(0), pages * page_bytes(ps)}}, ps);
}

MmuConfig modeled(std::uint32_t ptws, std::uint32_t prmb, TranslationCacheKind cache = TranslationCacheKind::None,
                  std::uint32_t entries = 1)
{
    MmuConfig c;
    c.num_ptws = ptws;
    c.prmb_slots_per_ptw = prmb;
    c.translation_cache = cache;
    c.translation_cache_entries = entries;
    return c;
}

// Ticks every cycle in [from, to] and gathers completions.
std::vector<TranslationCompletion> run_until(Mmu &m, Cycle from, Cycle to)
{
    std::vector<TranslationCompletion> out;
    for (Cycle c = from; c <= to; ++c)
        for (auto &x : m.tick(c))
            out.push_back(x);
    return out;
}

} // namespace

TEST_CASE("TLB hit completes after the hit latency")
{
    const auto pt = table_for(4);
    Mmu m(modeled(8, 0), pt);
    REQUIRE(m.submit({0, kBase, 0}, 0).outcome == SubmitOutcome::AcceptedNewWalk);
    run_until(m, 0, 400);
    const auto r = m.submit({1, kBase, 410}, 410);
    CHECK(r.outcome == SubmitOutcome::AcceptedTlbHit);
    CHECK(r.done_cycle == 415);
    const auto done = run_until(m, 410, 415);
    REQUIRE(done.size() == 1);
    CHECK(done[0].cycle == 415);
    CHECK(done[0].path == CompletionPath::TlbHit);
}

TEST_CASE("duplicate misses merge into one walk")
{
    const auto pt = table_for(4);
    Mmu m(modeled(1, 8), pt);
    CHECK(m.submit({0, kBase, 0}, 0).outcome == SubmitOutcome::AcceptedNewWalk);
    for (std::uint64_t id = 1; id < 8; ++id)
        CHECK(m.submit({id, kBase, id}, id).outcome == SubmitOutcome::AcceptedMerged);
    CHECK(m.stats().walks_started == 1);
    CHECK(m.stats().pts_merges == 7);
    CHECK(m.invariants_hold());
}

TEST_CASE("blocked when every walker is busy and its merge buffer is full")
{
    const auto pt = table_for(4);
    Mmu m(modeled(2, 1), pt);
    CHECK(m.submit({0, kBase, 0}, 0).accepted());
    CHECK(m.submit({1, kBase + 1, 0}, 0).accepted());
    CHECK(m.submit({2, kBase, 0}, 0).outcome == SubmitOutcome::AcceptedMerged);
    CHECK(m.submit({3, kBase + 1, 0}, 0).outcome == SubmitOutcome::AcceptedMerged);
    // PTS hit, PRMB full
    CHECK(m.submit({4, kBase, 0}, 0).outcome == SubmitOutcome::Blocked);
    // PTS miss, no idle walker
    CHECK(m.submit({4, kBase + 2, 0}, 0).outcome == SubmitOutcome::Blocked);
    CHECK(m.stats().blocked_cycles == 2);
    CHECK(m.stats().submissions == 4);
}

TEST_CASE("cold small-page walk: 4 levels, 400 cycles, 4 memory reads")
{
    const auto pt = table_for(4);
    for (bool with_memory : {false, true}) {
        Dram dram(DramConfig{});
        Mmu m(modeled(8, 0), pt, with_memory ? &dram : nullptr);
        m.submit({0, kBase + 2, 7}, 7);
        const auto done = run_until(m, 7, 1000);
        REQUIRE(done.size() == 1);
        CHECK(done[0].cycle == 7 + 400);
        CHECK(done[0].frame == pt.lookup(kBase + 2));
        CHECK(m.stats().walk_memory_transactions == 4);
        if (with_memory)
            CHECK(dram.transactions() == 4);
    }
}

TEST_CASE("cold large-page walk: 3 levels, 300 cycles")
{
    const auto pt = table_for(2, PageSize::Large2M);
    Mmu m(modeled(8, 0), pt);
    m.submit({0, (1ULL << 40) >> 21, 0}, 0);
    const auto done = run_until(m, 0, 1000);
    REQUIRE(done.size() == 1);
    CHECK(done[0].cycle == 300);
    CHECK(m.stats().walk_memory_transactions == 3);
}

TEST_CASE("TPR hit skips to the leaf level")
{
    const auto pt = table_for(8);
    Mmu m(modeled(1, 4, TranslationCacheKind::Tpr), pt);
    m.submit({0, kBase, 0}, 0);
    run_until(m, 0, 400);
    m.submit({1, kBase + 1, 500}, 500);
    const auto done = run_until(m, 500, 1000);
    REQUIRE(done.size() == 1);
    CHECK(done[0].cycle == 600);
    CHECK(m.stats().walk_memory_transactions == 5);
    CHECK(m.stats().path_hit_l4 == 1);
    CHECK(m.stats().path_hit_l3 == 1);
    CHECK(m.stats().path_hit_l2 == 1);
    CHECK(m.stats().path_probes == 2);
}

TEST_CASE("merged requests drain one per cycle after the walk")
{
    const auto pt = table_for(4);
    Mmu m(modeled(1, 4), pt);
    m.submit({0, kBase, 0}, 0);
    m.submit({1, kBase, 1}, 1);
    m.submit({2, kBase, 2}, 2);
    m.submit({3, kBase, 3}, 3);
    const auto done = run_until(m, 0, 1000);
    REQUIRE(done.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(done[i].id == i);
        CHECK(done[i].cycle == 400 + i);
        CHECK(done[i].frame == pt.lookup(kBase));
    }
    CHECK(done[0].path == CompletionPath::Walk);
    CHECK(done[3].path == CompletionPath::Merged);
    CHECK(m.stats().prmb_drains == 3);
}

TEST_CASE("walker stays busy while draining")
{
    const auto pt = table_for(4);
    Mmu m(modeled(1, 2), pt);
    m.submit({0, kBase, 0}, 0);
    m.submit({1, kBase, 0}, 0);
    m.submit({2, kBase, 0}, 0);
    run_until(m, 0, 400);
    CHECK(m.walking_ptws() == 0);
    CHECK(m.pts_entries() == 0);
    // drains at 401 and 402; the walker is not free before then
    CHECK(m.submit({3, kBase + 1, 400}, 400).outcome == SubmitOutcome::Blocked);
    run_until(m, 401, 402);
    CHECK(m.submit({3, kBase + 1, 403}, 403).outcome == SubmitOutcome::AcceptedNewWalk);
}

TEST_CASE("without merge slots every miss takes its own walker")
{
    const auto pt = table_for(4);
    Mmu m(modeled(4, 0), pt);
    for (std::uint64_t id = 0; id < 4; ++id)
        CHECK(m.submit({id, kBase, id}, id).outcome == SubmitOutcome::AcceptedNewWalk);
    CHECK(m.submit({4, kBase, 4}, 4).outcome == SubmitOutcome::Blocked);
    CHECK(m.stats().walks_started == 4);
    CHECK(m.pts_entries() == 0);
    const auto done = run_until(m, 0, 1000);
    CHECK(done.size() == 4);
    CHECK(m.stats().tlb_fills == 4);
}

TEST_CASE("streaming one 2MB region with a single TPR: 1 cold walk and 511 hits")
{
    const auto pt = table_for(512);
    Mmu m(modeled(1, 0, TranslationCacheKind::Tpr), pt);
    std::vector<Vpn> trace;
    for (Vpn v = 0; v < 512; ++v)
        trace.push_back(kBase + v);
    const auto run = run_translation_trace(m, trace);
    CHECK(run.completions.size() == 512);
    CHECK(m.stats().walks_started == 512);
    CHECK(m.stats().path_hit_l2 == 511);
    CHECK(m.stats().walk_memory_transactions == 4 + 511);
}

TEST_CASE("empty path cache starts at the root")
{
    const auto pt = table_for(4);
    for (auto kind : {TranslationCacheKind::Tpr, TranslationCacheKind::Tpc, TranslationCacheKind::Uptc}) {
        Mmu m(modeled(1, 0, kind, 4), pt);
        m.submit({0, kBase, 0}, 0);
        run_until(m, 0, 1000);
        CHECK(m.stats().walk_memory_transactions == 4);
        CHECK(m.stats().path_hit_l4 == 0);
    }
}

TEST_CASE("UPTC probes every level and reads only the misses")
{
    const auto pt = table_for(1024);
    Mmu m(modeled(1, 0, TranslationCacheKind::Uptc, 8), pt);
    m.submit({0, kBase, 0}, 0);
    run_until(m, 0, 400);
    // neighbor page: L4/L3/L2 PTEs hit, L1 PTE differs
    m.submit({1, kBase + 1, 401}, 401);
    const auto d = run_until(m, 401, 1000);
    REQUIRE(d.size() == 1);
    CHECK(d[0].cycle == 501);
    CHECK(m.stats().walk_memory_transactions == 5);
    // repeated page after TLB invalidation: every PTE cached, no reads
    m.invalidate(kBase + 1);
    m.submit({2, kBase + 1, 1001}, 1001);
    const auto e = run_until(m, 1001, 1001);
    REQUIRE(e.size() == 1);
    CHECK(e[0].cycle == 1001);
    CHECK(m.stats().walk_memory_transactions == 5);
}

TEST_CASE("TPC beats UPTC on a dense stream at two entries")
{
    const auto pt = table_for(4096);
    std::vector<Vpn> trace;
    for (Vpn v = 0; v < 4096; ++v)
        trace.push_back(kBase + v);
    Mmu tpc(modeled(8, 32, TranslationCacheKind::Tpc, 2), pt);
    Mmu uptc(modeled(8, 32, TranslationCacheKind::Uptc, 2), pt);
    run_translation_trace(tpc, trace);
    run_translation_trace(uptc, trace);
    CHECK(tpc.stats().walk_memory_transactions < uptc.stats().walk_memory_transactions);
}

TEST_CASE("oracle completes in the submission cycle")
{
    const auto pt = table_for(4);
    Mmu m(MmuConfig::oracle(), pt);
    const auto r = m.submit({0, kBase + 3, 12}, 12);
    CHECK(r.outcome == SubmitOutcome::AcceptedTlbHit);
    CHECK(r.done_cycle == 12);
    const auto d = m.tick(12);
    REQUIRE(d.size() == 1);
    CHECK(d[0].cycle == 12);
    CHECK(d[0].frame == pt.lookup(kBase + 3));
    // never blocks
    for (std::uint64_t id = 1; id < 100; ++id)
        CHECK(m.submit({id, kBase + 3, 12}, 12).accepted());
}

TEST_CASE("faulting walks complete without a frame and do not fill the TLB")
{
    const auto pt = table_for(1);
    Mmu m(modeled(2, 2), pt);
    m.submit({0, kBase + 5, 0}, 0);
    m.submit({1, kBase + 5, 0}, 0);
    const auto d = run_until(m, 0, 1000);
    REQUIRE(d.size() == 2);
    CHECK(d[0].fault());
    CHECK(d[0].fault_level == 1);
    CHECK(d[1].fault());
    CHECK(m.stats().faults == 2);
    CHECK(m.tlb().size() == 0);
    CHECK(m.stats().walk_memory_transactions == 4);

    Mmu o(MmuConfig::oracle(), pt);
    o.submit({0, 3, 0}, 0);
    const auto f = o.tick(0);
    REQUIRE(f.size() == 1);
    CHECK(f[0].fault_level == 4);
}

TEST_CASE("request ids must increase")
{
    const auto pt = table_for(4);
    Mmu m(modeled(2, 2), pt);
    m.submit({5, kBase, 0}, 0);
    CHECK_THROWS_AS(m.submit({5, kBase, 1}, 1), SimError);
    CHECK(m.next_request_id() == 6);
}

TEST_CASE("TLB is strict LRU")
{
    Tlb t(2);
    t.insert(1, 10);
    t.insert(2, 20);
    CHECK(t.lookup(1) == FrameNumber{10});
    t.insert(3, 30);
    CHECK(t.contains(1));
    CHECK_FALSE(t.contains(2));
    CHECK(t.lru_order() == std::vector<Vpn>{3, 1});
}

TEST_CASE("path matching counts agreeing upper levels")
{
    const std::uint64_t a = (1ULL << 18) | (2ULL << 9) | 3;
    CHECK(matching_path_levels(a, a, PageSize::Small4K) == 3);
    CHECK(matching_path_levels(a, a ^ 1, PageSize::Small4K) == 2);
    CHECK(matching_path_levels(a, a ^ (1ULL << 9), PageSize::Small4K) == 1);
    CHECK(matching_path_levels(a, a ^ (1ULL << 18), PageSize::Small4K) == 0);
    // large pages: tag is (l4, l3)
    const std::uint64_t b = (4ULL << 9) | 5;
    CHECK(matching_path_levels(b, b, PageSize::Large2M) == 2);
    CHECK(matching_path_levels(b, b ^ 1, PageSize::Large2M) == 1);
}

TEST_CASE("config validation and presets")
{
    CHECK(MmuConfig::iommu_baseline().num_ptws == 8);
    CHECK(MmuConfig::iommu_baseline().prmb_slots_per_ptw == 0);
    CHECK(MmuConfig::throughput_centric().num_ptws == 128);
    CHECK(MmuConfig::throughput_centric().prmb_slots_per_ptw == 32);
    CHECK(MmuConfig::throughput_centric().translation_cache == TranslationCacheKind::Tpr);
    CHECK(MmuConfig{}.tlb_entries == 2048);
    CHECK(MmuConfig{}.tlb_hit_latency == 5);
    CHECK(MmuConfig{}.walk_cycles_per_level == 100);
    MmuConfig bad;
    bad.num_ptws = 0;
    CHECK_THROWS_AS(bad.validate(), SimError);
    CHECK_THROWS_AS(parse_translation_cache("l2"), SimError);
    CHECK(parse_translation_cache("uptc") == TranslationCacheKind::Uptc);
}

TEST_CASE("random configs: correct frames, conservation, PTS invariant")
{
    Rng rng(2024);
    for (int round = 0; round < 40; ++round) {
        const PageSize ps = rng.below(4) == 0 ? PageSize::Large2M : PageSize::Small4K;
        const std::uint64_t pages = 1 + rng.below(ps == PageSize::Small4K ? 3000 : 40);
        const auto pt = PageTable::build({{SegmentKind::Weights, 0, default_segment_base(0), pages * page_bytes(ps)}},
                                         ps, {FramePolicy::ShuffledSeeded, rng.next(), 0});
        MmuConfig cfg = modeled(1 + static_cast<std::uint32_t>(rng.below(16)),
                                static_cast<std::uint32_t>(rng.below(5)),
                                static_cast<TranslationCacheKind>(rng.below(4)),
                                1 + static_cast<std::uint32_t>(rng.below(8)));
        cfg.tlb_entries = static_cast<std::uint32_t>(rng.below(64));
        Dram dram(DramConfig{});
        Mmu m(cfg, pt, rng.below(2) ? &dram : nullptr);
        const Vpn base = vpn_of(default_segment_base(0), ps);

        std::map<std::uint64_t, Vpn> pending;
        std::uint64_t id = 0, accepted = 0, completed = 0;
        Cycle now = 0;
        for (int i = 0; i < 600; ++i, ++now) {
            for (const auto &c : m.tick(now)) {
                REQUIRE(pending.count(c.id));
                CHECK(c.vpn == pending[c.id]);
                CHECK(c.frame == pt.lookup(c.vpn));
                CHECK(c.cycle <= now);
                pending.erase(c.id);
                ++completed;
            }
            // mix of streaming, repeats and unmapped pages
            const Vpn v = base + (rng.below(10) == 0 ? pages + rng.below(4) : rng.below(std::min<std::uint64_t>(pages, 64)));
            if (m.submit({id, v, now}, now).accepted()) {
                pending[id++] = v;
                ++accepted;
            }
            CHECK(m.invariants_hold());
            CHECK(completed + m.in_flight() == accepted);
        }
        while (m.in_flight() > 0) {
            const auto next = m.next_event_cycle();
            REQUIRE(next.has_value());
            now = std::max(now, *next);
            for (const auto &c : m.tick(now)) {
                CHECK(c.frame == pt.lookup(c.vpn));
                pending.erase(c.id);
            }
        }
        CHECK(pending.empty());
        CHECK(m.stats().walks_started <= m.stats().tlb_misses);
        CHECK(m.stats().completions == m.stats().submissions);
    }
}

TEST_CASE("merging and TPR never add walks or walk reads")
{
    Rng rng(11);
    const auto pt = table_for(2048);
    for (int round = 0; round < 10; ++round) {
        std::vector<Vpn> trace;
        Vpn v = kBase + rng.below(1024);
        for (int i = 0; i < 3000; ++i) {
            if (rng.below(8) == 0)
                v = kBase + rng.below(2048);
            trace.push_back(v);
            if (rng.below(16) == 0 && v + 1 < kBase + 2048)
                ++v;
        }
        Mmu plain(modeled(8, 0), pt), merged(modeled(8, 16), pt);
        const auto a = run_translation_trace(plain, trace);
        const auto b = run_translation_trace(merged, trace);
        CHECK(merged.stats().walks_started <= plain.stats().walks_started);
        Mmu no_tpr(modeled(8, 16), pt), tpr(modeled(8, 16, TranslationCacheKind::Tpr), pt);
        run_translation_trace(no_tpr, trace);
        const auto c = run_translation_trace(tpr, trace);
        CHECK(tpr.stats().walk_memory_transactions <= no_tpr.stats().walk_memory_transactions);
        std::map<std::uint64_t, std::optional<FrameNumber>> fa, fb, fc;
        for (const auto &x : a.completions)
            fa[x.id] = x.frame;
        for (const auto &x : b.completions)
            fb[x.id] = x.frame;
        for (const auto &x : c.completions)
            fc[x.id] = x.frame;
        CHECK(fa == fb);
        CHECK(fa == fc);
    }
}
