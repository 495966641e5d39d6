#pragma once

// Weight-stationary systolic NPU with a double-buffered scratchpad. A layer is
// a GEMM (M x K) * (K x N); tiles are fetched by a DMA engine that linearizes
// each tile into fixed-size memory transactions and requests one address
// translation per transaction, one per cycle.

#include <cstdint>
#include <string>
#include <vector>

#include "npusim/memory_system.hpp"
#include "npusim/page_table.hpp"
#include "npusim/translation_engine.hpp"

namespace npusim {

struct NpuConfig {
    std::uint32_t array_dim = 128;
    std::uint64_t spm_activation_bytes = 15ULL << 20;
    std::uint64_t spm_weight_bytes = 10ULL << 20;
    std::uint32_t dma_txn_bytes = 64;
    std::uint32_t element_bytes = 1;
    // consecutive transactions to one VPN share a translation
    bool dma_reuse_window = false;
    // write output tiles back through the DMA (translated like fetches)
    bool mirror_output_writes = false;

    void validate() const;
};

struct GemmShape {
    std::uint64_t m = 1;
    std::uint64_t k = 1;
    std::uint64_t n = 1;

    friend bool operator==(const GemmShape &, const GemmShape &) = default;
};

struct LayerConfig {
    std::string name;
    GemmShape gemm;
    std::uint32_t batch = 1; // multiplies M
    Segment ia;              // (M*batch) x K, row-major
    Segment w;               // K x N, row-major
    Segment out;             // (M*batch) x N, row-major

    GemmShape mapped() const { return {gemm.m * batch, gemm.k, gemm.n}; }
    std::vector<Segment> segments() const { return {ia, w, out}; }
};

/// Lays out IA, W and OUT at consecutive default segment slots.
LayerConfig make_gemm_layer(std::string name, GemmShape gemm, std::uint32_t batch, const NpuConfig &npu,
                            unsigned first_slot = 0);

enum class TensorKind : std::uint8_t { IA, W, Out };
std::string to_string(TensorKind t);

struct Span {
    VirtAddr start;
    std::uint64_t length = 0;
};

struct TileFetch {
    TensorKind tensor = TensorKind::W;
    std::vector<Span> spans;
    std::uint64_t total_bytes = 0;
    std::uint32_t tile_id = 0;
};

/// One pipeline step: the DMA work it needs, then one sub-GEMM on the array.
struct TileStep {
    std::vector<TileFetch> fetches;
    GemmShape compute;
};

struct MemoryTransaction {
    VirtAddr va;
    std::uint32_t bytes = 0;
    std::uint32_t tile_id = 0;
    std::uint64_t seq = 0;
};

/// Pipeline schedule for a layer: W tiles outermost (N blocks, then K blocks),
/// IA row blocks inside. Each tile fits in half of its SPM partition.
std::vector<TileStep> plan_layer(const LayerConfig &layer, const NpuConfig &npu);
/// Just the tile fetches of plan_layer, in DMA order.
std::vector<TileFetch> plan_tiles(const LayerConfig &layer, const NpuConfig &npu);

/// Splits a tile into transactions on a dma_txn_bytes-aligned grid, so no
/// transaction crosses a page. Ascending (span, offset) order.
std::vector<MemoryTransaction> linearize(const TileFetch &tile, const NpuConfig &npu, std::uint64_t first_seq = 0);

/// ceil(K/P) * ceil(N/P) * (M + 2P)
Cycle compute_cycles(const GemmShape &g, const NpuConfig &npu);

/// VPN of every transaction the layer's DMA issues, in order.
std::vector<Vpn> layer_translation_trace(const LayerConfig &layer, const NpuConfig &npu, PageSize ps);

struct StepPhase {
    Cycle fetch_start = 0;
    Cycle fetch_end = 0;
    Cycle compute_start = 0;
    Cycle compute_end = 0;
    std::uint64_t transactions = 0;
    std::uint64_t translations = 0;
    std::uint64_t distinct_vpns = 0;
};

struct RunStats {
    Cycle total_cycles = 0;
    std::vector<StepPhase> steps;
    TranslationStats mmu;
    std::uint64_t transactions = 0;
    std::uint64_t dram_bytes = 0;
    Cycle window = 1000;
    std::vector<std::uint64_t> translations_per_window; // submissions per window of `window` cycles
};

/// A translation faulted and nothing was set up to handle it.
class TranslationFault : public SimError {
  public:
    TranslationFault(VirtAddr va, int level);
    VirtAddr va;
    int level;
};

/// Runs the double-buffered pipeline:
///   fetch_start(n)   = max(dma_free, compute_end(n-2))
///   compute_start(n) = max(fetch_end(n), compute_end(n-1))
/// A fetch ends when the last data byte of the step has arrived.
RunStats run_layer(const LayerConfig &layer, const NpuConfig &npu, Mmu &mmu, Dram &dram);

} // namespace npusim
