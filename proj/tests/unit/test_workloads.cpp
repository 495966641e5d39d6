#include <doctest.h>

#include <map>
#include <set>

#include "npusim/translation_engine.hpp"
#include "npusim/workloads.hpp"

using namespace npusim;

TEST_CASE("conv lowering")
{
    // 227x227x3, 11x11 stride 4 -> 55x55 outputs
    const GemmShape g = ConvShape{227, 227, 3, 11, 11, 96, 4, 0}.lower();
    CHECK(g.m == 55 * 55);
    CHECK(g.k == 11 * 11 * 3);
    CHECK(g.n == 96);
    const GemmShape same = ConvShape{56, 56, 64, 3, 3, 64, 1, 1}.lower();
    CHECK(same.m == 56 * 56);
}

TEST_CASE("dense suites")
{
    const NpuConfig npu;
    const auto names = dense_suite_names();
    CHECK(std::find(names.begin(), names.end(), "gemv-rnn") != names.end());
    CHECK(std::find(names.begin(), names.end(), "toy") != names.end());

    const auto rnn = dense_suite("gemv-rnn", npu);
    REQUIRE_FALSE(rnn.empty());
    for (const auto &l : rnn)
        CHECK(l.gemm.m == 1); // GEMV
    const auto toy = dense_suite("toy", npu);
    CHECK(toy.size() == 1);

    const auto b8 = dense_suite("gemv-rnn-b08", npu);
    REQUIRE(b8.size() == rnn.size());
    for (std::size_t i = 0; i < rnn.size(); ++i) {
        CHECK(b8[i].mapped().m == 8 * rnn[i].mapped().m);
        CHECK(b8[i].ia.length == 8 * rnn[i].ia.length);
        CHECK(b8[i].w.length == rnn[i].w.length);
    }
    CHECK(dense_suite("lstm-b01", npu).size() == dense_suite("lstm", npu).size());
    CHECK_THROWS_AS(dense_suite("vgg", npu), SimError);
    CHECK_THROWS_AS(dense_suite("toy-b00", npu), SimError);

    // layers of a suite can share one page table
    for (const auto &name : names) {
        AddressLayout layout;
        for (const auto &l : dense_suite(name, npu))
            for (const auto &s : l.segments())
                CHECK_NOTHROW(layout.add(s));
    }
}

TEST_CASE("one table on one NPU is all local")
{
    EmbeddingModel m;
    m.tables = {{1000, 256}};
    m.batch = 16;
    const auto tr = gather_trace(m, Placement::round_robin(1, 1));
    REQUIRE(tr.size() == 1);
    CHECK(tr[0].size() == 16);
    for (const auto &g : tr[0])
        CHECK(g.owner == 0);
}

TEST_CASE("two tables on two NPUs: four local and four remote gathers each")
{
    EmbeddingModel m;
    m.tables = {{1000, 256}, {1000, 256}};
    m.batch = 4;
    const auto tr = gather_trace(m, Placement::round_robin(2, 2));
    for (std::uint32_t npu = 0; npu < 2; ++npu) {
        int local = 0, remote = 0;
        for (const auto &g : tr[npu])
            (g.owner == npu ? local : remote)++;
        CHECK(local == 4);
        CHECK(remote == 4);
    }
}

TEST_CASE("gather traces are seeded")
{
    EmbeddingModel m;
    m.tables = {{100000, 256}, {5000, 128}};
    m.batch = 50;
    m.lookups_per_sample = 3;
    const auto p = Placement::round_robin(2, 3);
    const auto a = gather_trace(m, p);
    const auto b = gather_trace(m, p);
    bool same = true;
    for (std::size_t n = 0; n < a.size(); ++n) {
        REQUIRE(a[n].size() == 50 * 2 * 3);
        for (std::size_t i = 0; i < a[n].size(); ++i)
            same &= a[n][i].row == b[n][i].row && a[n][i].table == b[n][i].table;
    }
    CHECK(same);
    m.seed = 2;
    const auto c = gather_trace(m, p);
    bool differs = false;
    for (std::size_t i = 0; i < a[0].size(); ++i)
        differs |= a[0][i].row != c[0][i].row;
    CHECK(differs);
    // order: sample, table, lookup
    CHECK(a[0][0].table == 0);
    CHECK(a[0][3].table == 1);
    CHECK(a[0][6].table == 0);
    for (const auto &g : a[1])
        CHECK(g.row < m.tables[g.table].rows);
}

TEST_CASE("zipf traces reuse rows and pages more than uniform ones")
{
    EmbeddingModel m;
    m.tables = {{1'000'000, 256}};
    m.batch = 4000;
    const auto layout_uniform = embedding_layout(m);
    auto hit_rate = [&](const EmbeddingModel &model) {
        const auto tr = gather_trace(model, Placement::round_robin(1, 1));
        std::vector<Vpn> vpns;
        for (const auto &g : tr[0])
            vpns.push_back(vpn_of(gather_va(layout_uniform, model, g), PageSize::Small4K));
        std::vector<Segment> segs(layout_uniform.segments());
        const auto pt = PageTable::build(segs, PageSize::Small4K);
        MmuConfig c = MmuConfig::throughput_centric();
        c.tlb_entries = 128;
        Mmu mmu(c, pt);
        run_translation_trace(mmu, vpns);
        return mmu.stats().tlb_hit_rate();
    };
    const double uniform = hit_rate(m);
    m.distribution = IndexDistribution::Zipf;
    m.zipf_exponent = 1.0;
    const double zipf = hit_rate(m);
    CHECK(zipf > uniform + 0.3);
    // low locality regime: 128-entry TLB reaches 512KB of a 256MB table
    CHECK(uniform < 0.01);
}

TEST_CASE("sequential distribution walks rows in order")
{
    EmbeddingModel m;
    m.tables = {{10, 256}};
    m.batch = 12;
    m.distribution = IndexDistribution::Sequential;
    const auto tr = gather_trace(m, Placement::round_robin(1, 1));
    for (std::size_t i = 0; i < tr[0].size(); ++i)
        CHECK(tr[0][i].row == i % 10);
}

TEST_CASE("placement and model validation")
{
    CHECK_THROWS_AS(Placement::round_robin(3, 0), SimError);
    Placement p = Placement::round_robin(3, 2);
    CHECK(p.owner == std::vector<std::uint32_t>{0, 1, 0});
    p.owner[1] = 5;
    CHECK_THROWS_AS(p.validate(3), SimError);
    EmbeddingModel m;
    CHECK_THROWS_AS(m.validate(), SimError);
    m.tables = {{2, 256}};
    m.lookups_per_sample = 3;
    CHECK_THROWS_AS(m.validate(), SimError);
    CHECK(parse_index_distribution("zipf") == IndexDistribution::Zipf);
    CHECK_THROWS_AS(parse_index_distribution("normal"), SimError);
}

TEST_CASE("embedding layout puts each table in its own slot")
{
    EmbeddingModel m;
    m.tables = {{100, 256}, {100, 512}};
    const auto layout = embedding_layout(m, 4);
    REQUIRE(layout.segments().size() == 2);
    CHECK(layout.segments()[1].base == default_segment_base(5));
    CHECK(gather_va(layout, m, {1, 3, 0}).value == default_segment_base(5).value + 3 * 512);
}
