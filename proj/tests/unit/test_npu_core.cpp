#include <doctest.h>

#include <algorithm>
#include <set>

#include "npusim/npu_core.hpp"
#include "npusim/rng.hpp"

using namespace npusim;

namespace {

struct Rig {
    LayerConfig layer;
    PageTable pt;

    Rig(GemmShape g, const NpuConfig &npu, PageSize ps = PageSize::Small4K)
        : layer(make_gemm_layer("t", g, 1, npu)), pt(PageTable::build(layer.segments(), ps))
    {
    }

    RunStats run(const MmuConfig &cfg, const NpuConfig &npu, DramConfig dc = {})
    {
        Dram dram(dc);
        Mmu mmu(cfg, pt, &dram);
        return run_layer(layer, npu, mmu, dram);
    }
};

} // namespace

TEST_CASE("compute cycle formula")
{
    const NpuConfig npu;
    CHECK(compute_cycles({1, 128, 128}, npu) == 1 * 1 * (1 + 256));
    CHECK(compute_cycles({128, 128, 128}, npu) == 384);
    CHECK(compute_cycles({128, 256, 128}, npu) == 2 * 384);
    CHECK(compute_cycles({1, 129, 1}, npu) == 2 * 257);
    CHECK_THROWS_AS(compute_cycles({0, 1, 1}, npu), SimError);
}

TEST_CASE("10MB weights in a 10MB weight SPM take two 5MB tiles")
{
    const NpuConfig npu;
    const auto layer = make_gemm_layer("fc", {1, 2560, 4096}, 1, npu);
    CHECK(layer.w.length == 10ULL << 20);
    std::vector<TileFetch> w;
    for (const auto &t : plan_tiles(layer, npu))
        if (t.tensor == TensorKind::W)
            w.push_back(t);
    REQUIRE(w.size() == 2);
    for (const auto &t : w)
        CHECK(t.total_bytes <= npu.spm_weight_bytes / 2);
    CHECK(w[0].total_bytes + w[1].total_bytes == layer.w.length);
}

TEST_CASE("small tensor is a single tile")
{
    const NpuConfig npu;
    const auto layer = make_gemm_layer("tiny", {1, 32, 32}, 1, npu);
    const auto tiles = plan_tiles(layer, npu);
    REQUIRE(tiles.size() == 2); // one W, one IA
    CHECK(tiles[0].tensor == TensorKind::W);
    CHECK(tiles[0].total_bytes == 1024);
    CHECK(tiles[0].spans.size() == 1);
}

TEST_CASE("a 5MB dense tile touches 1280 pages")
{
    const NpuConfig npu;
    const auto layer = make_gemm_layer("w5", {1, 1280, 4096}, 1, npu);
    const auto tiles = plan_tiles(layer, npu);
    REQUIRE(tiles[0].tensor == TensorKind::W);
    CHECK(tiles[0].total_bytes == 5ULL << 20);
    std::set<Vpn> vpns;
    for (const auto &t : linearize(tiles[0], npu))
        vpns.insert(vpn_of(t.va, PageSize::Small4K));
    CHECK(vpns.size() == 1280);
}

TEST_CASE("linearize examples")
{
    const NpuConfig npu;
    TileFetch one{TensorKind::W, {{VirtAddr(1ULL << 40), 4096}}, 4096, 0};
    CHECK(linearize(one, npu).size() == 64);

    TileFetch strided;
    for (int r = 0; r < 100; ++r)
        strided.spans.push_back({VirtAddr((1ULL << 40) + r * 8192ULL), 256});
    const auto tx = linearize(strided, npu);
    CHECK(tx.size() == 400); // ceil(256/64) per row
    std::set<Vpn> pages;
    for (const auto &t : tx)
        pages.insert(vpn_of(t.va, PageSize::Small4K));
    CHECK(pages.size() == 100);

    TileFetch two{TensorKind::IA, {{VirtAddr(1ULL << 40), 128}, {VirtAddr((1ULL << 40) + 1024), 128}}, 256, 0};
    std::set<Vpn> shared;
    for (const auto &t : linearize(two, npu))
        shared.insert(vpn_of(t.va, PageSize::Small4K));
    CHECK(shared.size() == 1);
}

TEST_CASE("linearized transactions cover spans exactly and never cross a page")
{
    Rng rng(5);
    const NpuConfig npu;
    for (int round = 0; round < 200; ++round) {
        TileFetch t;
        std::uint64_t cursor = (1ULL << 40) + rng.below(8192);
        std::uint64_t expect = 0;
        for (int s = 0, n = 1 + static_cast<int>(rng.below(6)); s < n; ++s) {
            const std::uint64_t len = 1 + rng.below(10000);
            t.spans.push_back({VirtAddr(cursor), len});
            expect += len;
            cursor += len + rng.below(5000);
        }
        const auto tx = linearize(t, npu, 100);
        std::uint64_t total = 0;
        std::size_t span = 0;
        std::uint64_t at = t.spans[0].start.value;
        for (std::size_t i = 0; i < tx.size(); ++i) {
            CHECK(tx[i].seq == 100 + i);
            CHECK(tx[i].bytes <= 64);
            CHECK(vpn_of(tx[i].va, PageSize::Small4K) ==
                  vpn_of(VirtAddr(tx[i].va.value + tx[i].bytes - 1), PageSize::Small4K));
            if (at == t.spans[span].start.value + t.spans[span].length)
                at = t.spans[++span].start.value;
            CHECK(tx[i].va.value == at); // contiguous within a span, ascending
            at += tx[i].bytes;
            total += tx[i].bytes;
        }
        CHECK(total == expect);
    }
}

TEST_CASE("tiles fit in half an SPM and cover each tensor once")
{
    NpuConfig npu;
    npu.spm_weight_bytes = 256 << 10;
    npu.spm_activation_bytes = 64 << 10;
    const auto layer = make_gemm_layer("big", {300, 1000, 700}, 1, npu);
    std::uint64_t w_bytes = 0;
    std::set<std::uint64_t> w_addrs;
    for (const auto &s : plan_layer(layer, npu)) {
        CHECK(s.compute.k * s.compute.n <= npu.spm_weight_bytes / 2);
        CHECK(s.compute.m * s.compute.k <= npu.spm_activation_bytes / 2);
        for (const auto &f : s.fetches) {
            const auto half = f.tensor == TensorKind::W ? npu.spm_weight_bytes / 2 : npu.spm_activation_bytes / 2;
            CHECK(f.total_bytes <= half);
            if (f.tensor == TensorKind::W) {
                w_bytes += f.total_bytes;
                for (const auto &sp : f.spans)
                    for (std::uint64_t a = sp.start.value; a < sp.start.value + sp.length; a += 100)
                        CHECK(w_addrs.insert(a).second);
            }
        }
    }
    CHECK(w_bytes == layer.w.length);
}

TEST_CASE("oracle pipeline matches the double-buffering identity")
{
    const NpuConfig npu;
    for (GemmShape g : {GemmShape{1, 2560, 4096}, GemmShape{512, 2048, 4096}, GemmShape{64, 256, 256}}) {
        Rig rig(g, npu);
        const RunStats rs = rig.run(MmuConfig::oracle(), npu);
        const auto steps = plan_layer(rig.layer, npu);
        REQUIRE(steps.size() == rs.steps.size());
        // fetch of step i: every tile issues one 64B transaction per cycle, and
        // its last byte lands access_latency cycles after its last issue slot
        std::vector<Cycle> f, c;
        for (const auto &s : steps) {
            Cycle fi = 0;
            for (const auto &t : s.fetches)
                fi += linearize(t, npu).size() + 99;
            f.push_back(fi);
            c.push_back(compute_cycles(s.compute, npu));
        }
        Cycle expect = f[0];
        for (std::size_t i = 0; i + 1 < f.size(); ++i)
            expect += std::max(c[i], f[i + 1]);
        expect += c.back();
        CHECK(rs.total_cycles == expect);
        for (std::size_t i = 0; i < f.size(); ++i)
            CHECK(rs.steps[i].fetch_end - rs.steps[i].fetch_start == f[i]);
    }
}

TEST_CASE("compute never starts before its tile has landed")
{
    const NpuConfig npu;
    Rig rig({256, 2560, 4096}, npu);
    const RunStats rs = rig.run(MmuConfig::iommu_baseline(), npu);
    for (std::size_t i = 0; i < rs.steps.size(); ++i) {
        CHECK(rs.steps[i].compute_start >= rs.steps[i].fetch_end);
        if (i >= 2)
            CHECK(rs.steps[i].fetch_start >= rs.steps[i - 2].compute_end);
    }
}

TEST_CASE("memory-bound layer time is its fetches plus the last compute")
{
    // 4-byte weights: a 128x128 block takes 1024 fetch cycles against 257 compute cycles
    NpuConfig npu;
    npu.element_bytes = 4;
    Rig rig({1, 1280, 8192}, npu);
    const RunStats rs = rig.run(MmuConfig::oracle(), npu);
    REQUIRE(rs.steps.size() == 8);
    Cycle fetch = 0;
    for (const auto &s : rs.steps)
        fetch += s.fetch_end - s.fetch_start;
    const Cycle last = rs.steps.back().compute_end - rs.steps.back().compute_start;
    CHECK(3 * last < rs.steps.back().fetch_end - rs.steps.back().fetch_start);
    CHECK(rs.total_cycles == fetch + last);
    // the DMA never idles
    for (std::size_t i = 1; i < rs.steps.size(); ++i)
        CHECK(rs.steps[i].fetch_start == rs.steps[i - 1].fetch_end);
}

TEST_CASE("baseline IOMMU is slower than the oracle on a bursty layer")
{
    const NpuConfig npu;
    Rig rig({1, 1024, 4096}, npu);
    const RunStats oracle = rig.run(MmuConfig::oracle(), npu);
    const RunStats base = rig.run(MmuConfig::iommu_baseline(), npu);
    CHECK(base.total_cycles > oracle.total_cycles);
    CHECK(base.mmu.walks_started > 0);
    CHECK(oracle.mmu.walks_started == 0);
    CHECK(oracle.transactions == base.transactions);
}

TEST_CASE("translations are issued at most one per cycle")
{
    const NpuConfig npu;
    Rig rig({1, 1024, 4096}, npu);
    const RunStats rs = rig.run(MmuConfig::throughput_centric(), npu);
    std::uint64_t total = 0;
    for (auto w : rs.translations_per_window) {
        CHECK(w <= rs.window);
        total += w;
    }
    CHECK(total == rs.mmu.submissions);
    CHECK(rs.mmu.submissions == rs.transactions);
}

TEST_CASE("reuse window shares translations between consecutive same-page transactions")
{
    NpuConfig npu;
    Rig rig({1, 1024, 4096}, npu);
    const RunStats full = rig.run(MmuConfig::throughput_centric(), npu);
    npu.dma_reuse_window = true;
    const RunStats reuse = rig.run(MmuConfig::throughput_centric(), npu);
    CHECK(reuse.transactions == full.transactions);
    CHECK(reuse.mmu.submissions == 1024 * 4096 / 4096 + 1); // one per W page, one for the IA page
    CHECK(reuse.mmu.submissions < full.mmu.submissions);
}

TEST_CASE("output write-back mirroring adds the output bytes")
{
    NpuConfig npu;
    Rig rig({64, 256, 512}, npu);
    const RunStats plain = rig.run(MmuConfig::oracle(), npu);
    npu.mirror_output_writes = true;
    const RunStats mirrored = rig.run(MmuConfig::oracle(), npu);
    CHECK(mirrored.dram_bytes == plain.dram_bytes + 64 * 512);
    CHECK(mirrored.total_cycles > plain.total_cycles);
}

TEST_CASE("unmapped pages abort a modeled run")
{
    const NpuConfig npu;
    const auto layer = make_gemm_layer("x", {1, 256, 256}, 1, npu);
    const auto pt = PageTable::build({layer.ia}, PageSize::Small4K); // W left unmapped
    Dram dram(DramConfig{});
    Mmu mmu(MmuConfig::iommu_baseline(), pt, &dram);
    CHECK_THROWS_AS(run_layer(layer, npu, mmu, dram), TranslationFault);
}
