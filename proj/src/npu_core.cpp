#include "npusim/npu_core.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

namespace npusim {

void NpuConfig::validate() const
{
    if (array_dim == 0)
        throw SimError("npu.array_dim must be >= 1");
    if (spm_activation_bytes == 0 || spm_weight_bytes == 0)
        throw SimError("npu SPM sizes must be > 0");
    if (dma_txn_bytes == 0 || (dma_txn_bytes & (dma_txn_bytes - 1)) != 0 || dma_txn_bytes > 4096)
        throw SimError("npu.dma_txn_bytes must be a power of two <= 4096");
    if (element_bytes != 1 && element_bytes != 2 && element_bytes != 4)
        throw SimError("npu.element_bytes must be 1, 2 or 4");
}

std::string to_string(TensorKind t)
{
    switch (t) {
    case TensorKind::IA: return "ia";
    case TensorKind::W: return "w";
    case TensorKind::Out: return "out";
    }
    return "?";
}

LayerConfig make_gemm_layer(std::string name, GemmShape gemm, std::uint32_t batch, const NpuConfig &npu,
                            unsigned first_slot)
{
    if (gemm.m == 0 || gemm.k == 0 || gemm.n == 0 || batch == 0)
        throw SimError("layer '" + name + "': dimensions must be >= 1");
    LayerConfig l;
    l.name = std::move(name);
    l.gemm = gemm;
    l.batch = batch;
    const std::uint64_t e = npu.element_bytes;
    const std::uint64_t m = gemm.m * batch;
    l.ia = Segment{SegmentKind::InputActivations, 0, default_segment_base(first_slot), m * gemm.k * e};
    l.w = Segment{SegmentKind::Weights, 0, default_segment_base(first_slot + 1), gemm.k * gemm.n * e};
    l.out = Segment{SegmentKind::OutputActivations, 0, default_segment_base(first_slot + 2), m * gemm.n * e};
    return l;
}

namespace {

// rows [r0, r0+rows) x cols [c0, c0+cols) of a row-major matrix with `row_len` columns
TileFetch matrix_tile(TensorKind kind, const Segment &seg, std::uint64_t row_len, std::uint64_t r0,
                      std::uint64_t rows, std::uint64_t c0, std::uint64_t cols, std::uint32_t e, std::uint32_t id)
{
    TileFetch t;
    t.tensor = kind;
    t.tile_id = id;
    for (std::uint64_t r = r0; r < r0 + rows; ++r) {
        const VirtAddr start = seg.base + (r * row_len + c0) * e;
        const std::uint64_t len = cols * e;
        if (!t.spans.empty() && t.spans.back().start.value + t.spans.back().length == start.value)
            t.spans.back().length += len;
        else
            t.spans.push_back(Span{start, len});
        t.total_bytes += len;
    }
    return t;
}

} // namespace

std::vector<TileStep> plan_layer(const LayerConfig &layer, const NpuConfig &npu)
{
    npu.validate();
    const GemmShape g = layer.mapped();
    const std::uint64_t e = npu.element_bytes;
    const std::uint64_t p = npu.array_dim;
    const std::uint64_t half_w = npu.spm_weight_bytes / 2;
    const std::uint64_t half_a = npu.spm_activation_bytes / 2;

    std::uint64_t kt = g.k, nt = g.n;
    if (g.k * g.n * e > half_w) {
        nt = half_w / (g.k * e);
        if (nt >= p) {
            nt = std::min(g.n, nt / p * p);
        } else {
            nt = std::min(g.n, p);
            kt = std::min(g.k, half_w / (nt * e));
            if (kt >= p)
                kt = kt / p * p;
        }
    }
    if (kt == 0)
        throw SimError("weight SPM too small for layer '" + layer.name + "'");

    const bool ia_resident = g.m * g.k * e <= half_a;
    const std::uint64_t mt = ia_resident ? g.m : std::min(g.m, half_a / (kt * e));
    if (mt == 0)
        throw SimError("activation SPM too small for layer '" + layer.name + "'");

    std::vector<TileStep> steps;
    std::vector<std::pair<std::size_t, TileFetch>> writes; // (producing step, tile)
    std::uint32_t id = 0;
    bool ia_fetched = false;
    std::pair<std::uint64_t, std::uint64_t> last_ia{~0ULL, ~0ULL};

    for (std::uint64_t n0 = 0; n0 < g.n; n0 += nt) {
        const std::uint64_t nb = std::min(nt, g.n - n0);
        for (std::uint64_t k0 = 0; k0 < g.k; k0 += kt) {
            const std::uint64_t kb = std::min(kt, g.k - k0);
            for (std::uint64_t m0 = 0; m0 < g.m; m0 += mt) {
                const std::uint64_t mb = std::min(mt, g.m - m0);
                TileStep s;
                if (m0 == 0)
                    s.fetches.push_back(matrix_tile(TensorKind::W, layer.w, g.n, k0, kb, n0, nb, e, id++));
                if (ia_resident) {
                    if (!ia_fetched)
                        s.fetches.push_back(matrix_tile(TensorKind::IA, layer.ia, g.k, 0, g.m, 0, g.k, e, id++));
                    ia_fetched = true;
                } else if (last_ia != std::pair{m0, k0}) {
                    s.fetches.push_back(matrix_tile(TensorKind::IA, layer.ia, g.k, m0, mb, k0, kb, e, id++));
                    last_ia = {m0, k0};
                }
                s.compute = {mb, kb, nb};
                if (npu.mirror_output_writes && k0 + kb == g.k)
                    writes.emplace_back(steps.size(),
                                        matrix_tile(TensorKind::Out, layer.out, g.n, m0, mb, n0, nb, e, 0));
                steps.push_back(std::move(s));
            }
        }
    }

    // An output tile leaves the SPM once its buffer may be reused, i.e. in
    // the DMA phase two steps later; leftovers go to a compute-free epilogue.
    if (!writes.empty()) {
        const std::size_t body = steps.size();
        for (auto &[producer, tile] : writes) {
            std::size_t target = producer + 2;
            if (target >= body) {
                if (steps.size() == body)
                    steps.push_back(TileStep{{}, {0, 0, 0}});
                target = body;
            }
            tile.tile_id = id++;
            steps[target].fetches.push_back(std::move(tile));
        }
    }
    return steps;
}

std::vector<TileFetch> plan_tiles(const LayerConfig &layer, const NpuConfig &npu)
{
    std::vector<TileFetch> out;
    for (auto &s : plan_layer(layer, npu))
        for (auto &f : s.fetches)
            out.push_back(std::move(f));
    return out;
}

std::vector<MemoryTransaction> linearize(const TileFetch &tile, const NpuConfig &npu, std::uint64_t first_seq)
{
    const std::uint64_t grid = npu.dma_txn_bytes;
    std::vector<MemoryTransaction> out;
    std::uint64_t seq = first_seq;
    for (const Span &s : tile.spans) {
        std::uint64_t a = s.start.value;
        const std::uint64_t end = a + s.length;
        while (a < end) {
            const std::uint64_t next = std::min((a / grid + 1) * grid, end);
            out.push_back(MemoryTransaction{VirtAddr(a), static_cast<std::uint32_t>(next - a), tile.tile_id, seq++});
            a = next;
        }
    }
    return out;
}

Cycle compute_cycles(const GemmShape &g, const NpuConfig &npu)
{
    if (g.m == 0 || g.k == 0 || g.n == 0)
        throw SimError("compute_cycles: dimensions must be >= 1");
    const std::uint64_t p = npu.array_dim;
    return ceil_div(g.k, p) * ceil_div(g.n, p) * (g.m + 2 * p);
}

std::vector<Vpn> layer_translation_trace(const LayerConfig &layer, const NpuConfig &npu, PageSize ps)
{
    std::vector<Vpn> out;
    for (const auto &tile : plan_tiles(layer, npu))
        for (const auto &t : linearize(tile, npu))
            out.push_back(vpn_of(t.va, ps));
    return out;
}

TranslationFault::TranslationFault(VirtAddr v, int l)
    : SimError("unhandled page fault at va 0x" + [&] {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%llx", static_cast<unsigned long long>(v.value));
          return std::string(buf);
      }() + " (level " + std::to_string(l) + ")"),
      va(v), level(l)
{
}

namespace {

class DmaEngine {
  public:
    DmaEngine(const NpuConfig &npu, Mmu &mmu, Dram &dram, RunStats &stats)
        : npu_(npu), mmu_(mmu), dram_(dram), stats_(stats), ps_(mmu.page_table().page_size())
    {
    }

    /// Issues `txns` from `start`; returns the cycle the last byte arrived.
    Cycle run(const std::vector<MemoryTransaction> &txns, Cycle start, StepPhase &phase)
    {
        struct Pending {
            std::vector<std::uint32_t> txns;
            std::optional<FrameNumber> frame;
            Cycle done = 0;
        };
        std::vector<Pending> reqs;
        const std::uint64_t first_id = mmu_.next_request_id();
        std::uint64_t outstanding = 0;
        Cycle now = start;
        Cycle data_end = start;
        std::unordered_set<Vpn> vpns;

        auto issue = [&](std::uint32_t t, FrameNumber frame, Cycle at) {
            const std::uint64_t off = txns[t].va.value & (page_bytes(ps_) - 1);
            const PhysAddr pa((frame << offset_bits(ps_)) | off);
            data_end = std::max(data_end, dram_.read(pa, txns[t].bytes, at));
            stats_.dram_bytes += txns[t].bytes;
        };
        auto drain = [&](Cycle c) {
            for (const auto &comp : mmu_.tick(c)) {
                if (comp.fault())
                    throw TranslationFault(vpn_base(comp.vpn, ps_), comp.fault_level);
                Pending &r = reqs[comp.id - first_id];
                r.frame = comp.frame;
                r.done = comp.cycle;
                for (auto t : r.txns)
                    issue(t, *comp.frame, comp.cycle);
                --outstanding;
            }
        };

        std::size_t i = 0;
        while (i < txns.size()) {
            drain(now);
            const Vpn v = vpn_of(txns[i].va, ps_);
            vpns.insert(v);
            if (npu_.dma_reuse_window && !reqs.empty() && vpn_of(txns[i - 1].va, ps_) == v) {
                Pending &r = reqs.back();
                if (r.frame)
                    issue(static_cast<std::uint32_t>(i), *r.frame, std::max(now, r.done));
                else
                    r.txns.push_back(static_cast<std::uint32_t>(i));
                ++i;
                ++now;
                continue;
            }
            const std::uint64_t id = first_id + reqs.size();
            if (mmu_.submit(TranslationRequest{id, v, now, origin(txns[i])}, now).accepted()) {
                reqs.push_back(Pending{{static_cast<std::uint32_t>(i)}, std::nullopt, 0});
                ++outstanding;
                count_window(now);
                ++i;
                ++now;
                continue;
            }
            const auto next = mmu_.next_event_cycle();
            if (!next)
                throw SimError("DMA blocked with no pending translations");
            const Cycle target = std::max(now + 1, *next);
            mmu_.add_blocked_cycles(target - now - 1);
            now = target;
        }
        drain(now);
        while (outstanding > 0) {
            const auto next = mmu_.next_event_cycle();
            if (!next)
                throw SimError("translations outstanding with no pending MMU events");
            now = std::max(now, *next);
            drain(now);
        }
        phase.transactions += txns.size();
        phase.translations += reqs.size();
        phase.distinct_vpns += vpns.size();
        return data_end;
    }

    void set_origin(TensorKind t) { tensor_ = t; }

  private:
    RequestOrigin origin(const MemoryTransaction &) const
    {
        switch (tensor_) {
        case TensorKind::IA: return RequestOrigin::DmaIA;
        case TensorKind::W: return RequestOrigin::DmaW;
        case TensorKind::Out: return RequestOrigin::DmaOut;
        }
        return RequestOrigin::DmaW;
    }

    void count_window(Cycle now)
    {
        const std::size_t w = now / stats_.window;
        if (stats_.translations_per_window.size() <= w)
            stats_.translations_per_window.resize(w + 1, 0);
        ++stats_.translations_per_window[w];
    }

    const NpuConfig &npu_;
    Mmu &mmu_;
    Dram &dram_;
    RunStats &stats_;
    PageSize ps_;
    TensorKind tensor_ = TensorKind::W;
};

} // namespace

RunStats run_layer(const LayerConfig &layer, const NpuConfig &npu, Mmu &mmu, Dram &dram)
{
    RunStats stats;
    const TranslationStats mmu_before = mmu.stats();
    DmaEngine dma(npu, mmu, dram, stats);
    const auto steps = plan_layer(layer, npu);

    Cycle dma_free = 0;
    std::uint64_t seq = 0;
    for (std::size_t n = 0; n < steps.size(); ++n) {
        StepPhase ph;
        ph.fetch_start = std::max(dma_free, n >= 2 ? stats.steps[n - 2].compute_end : 0);
        if (steps[n].compute.m == 0 && n >= 1) // epilogue: write-back of the last outputs
            ph.fetch_start = std::max(ph.fetch_start, stats.steps[n - 1].compute_end);
        Cycle t = ph.fetch_start;
        Cycle data_end = t;
        for (const auto &f : steps[n].fetches) {
            const auto txns = linearize(f, npu, seq);
            seq += txns.size();
            dma.set_origin(f.tensor);
            // tiles go one at a time: the next tile's translations start after
            // the previous tile's data has landed
            t = dma.run(txns, t, ph);
            data_end = std::max(data_end, t);
        }
        ph.fetch_end = data_end;
        dma_free = ph.fetch_end;
        ph.compute_start = std::max(ph.fetch_end, n >= 1 ? stats.steps[n - 1].compute_end : 0);
        const GemmShape &c = steps[n].compute;
        ph.compute_end = ph.compute_start + (c.m == 0 ? 0 : compute_cycles(c, npu));
        stats.transactions += ph.transactions;
        stats.steps.push_back(ph);
    }
    for (const auto &ph : stats.steps)
        stats.total_cycles = std::max({stats.total_cycles, ph.fetch_end, ph.compute_end});

    // only this layer's share when the MMU is reused across layers
    stats.mmu = mmu.stats();
    stats.mmu -= mmu_before;
    return stats;
}

} // namespace npusim
