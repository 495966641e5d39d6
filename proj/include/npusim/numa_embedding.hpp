#pragma once

// Embedding-gather case study on a multi-NPU system with model-parallel
// tables. One NPU's view is simulated; the other NPUs only own memory.
//
//   baseline copy: remote embeddings bounce through CPU memory over PCIe
//   NUMA:          translated fine-grained remote reads over PCIe (slow) or
//                  the NPU-NPU link (fast)
//   demand paging: remote pages start unmapped; each first touch faults and
//                  migrates the whole page, then the gather is retried

#include <cstdint>
#include <string>
#include <vector>

#include "npusim/memory_system.hpp"
#include "npusim/translation_engine.hpp"
#include "npusim/workloads.hpp"

namespace npusim {

enum class NumaStrategy : std::uint8_t { BaselineCopy, NumaSlow, NumaFast, DemandPaging };
std::string to_string(NumaStrategy s);
NumaStrategy parse_numa_strategy(const std::string &s);

/// NPU k owns physical region [k << 40, (k+1) << 40).
inline constexpr unsigned kNpuRegionShift = 40;

struct NumaConfig {
    std::uint32_t self_npu = 0;
    MmuConfig mmu = MmuConfig::throughput_centric();
    DramConfig dram;     // local NPU memory
    DramConfig cpu_dram; // CPU-side staging buffer
    LinkConfig pcie = LinkConfig::pcie();
    LinkConfig nvlink = LinkConfig::nvlink();
    bool per_embedding_copy = false;
    Cycle fault_overhead = 0;
    LinkKind migration_link = LinkKind::NvlinkNpuNpu;
    PageSize page_size = PageSize::Small4K;
};

struct LatencyBreakdown {
    Cycle local = 0;
    Cycle remote = 0;      // NUMA / demand-paging remote phase
    Cycle remote_leg1 = 0; // baseline: owner NPU -> CPU
    Cycle staging = 0;     // baseline: CPU buffer write + read
    Cycle remote_leg2 = 0; // baseline: CPU -> this NPU
    Cycle fault_handling = 0;
    Cycle migration_cycles = 0;
    std::uint64_t migration_bytes = 0;
    std::uint64_t migrations = 0;
    std::uint64_t faults = 0; // faulted translation completions
    std::uint64_t payload_bytes = 0;
    std::uint64_t remote_payload_bytes = 0;
    std::uint64_t local_gathers = 0;
    std::uint64_t remote_gathers = 0;
    Cycle total = 0;
    TranslationStats mmu;

    /// Bytes migrated beyond the remote payload actually needed.
    std::int64_t bloat_bytes() const
    {
        return static_cast<std::int64_t>(migration_bytes) - static_cast<std::int64_t>(remote_payload_bytes);
    }
};

struct GatherWorkload {
    EmbeddingModel model;
    Placement placement;
    AddressLayout layout;
    std::vector<std::vector<Gather>> trace;

    static GatherWorkload make(EmbeddingModel model, Placement placement, unsigned first_slot = 0);
};

LatencyBreakdown run_baseline_copy(const GatherWorkload &wl, const NumaConfig &cfg);
LatencyBreakdown run_numa(const GatherWorkload &wl, const NumaConfig &cfg, LinkKind link);

/// Keeps page-table, TLB and clock state between passes, so a second pass
/// over the same trace finds every page already migrated.
class DemandPagingSession {
  public:
    DemandPagingSession(const GatherWorkload &wl, NumaConfig cfg);
    DemandPagingSession(const DemandPagingSession &) = delete;
    DemandPagingSession &operator=(const DemandPagingSession &) = delete;

    LatencyBreakdown run();
    const PageTable &page_table() const { return pt_; }

  private:
    const GatherWorkload &wl_;
    NumaConfig cfg_;
    std::vector<FrameNumber> next_frame_; // per NPU region; filled while building pt_
    PageTable pt_;
    Dram dram_;
    Mmu mmu_;
    Link migration_;
    Cycle clock_ = 0;
};

LatencyBreakdown run_demand_paging(const GatherWorkload &wl, const NumaConfig &cfg);
LatencyBreakdown run_strategy(NumaStrategy s, const GatherWorkload &wl, const NumaConfig &cfg);

} // namespace npusim
