#pragma once

// Cycle-level NPU MMU: TLB -> pending translation scoreboard (PTS) -> merge
// into a walker's pending request merging buffer (PRMB), or dispatch to an
// idle page-table walker (PTW). Walkers may skip upper radix levels using a
// per-walker translation path register (TPR), a shared translation-path cache
// (TPC, virtually tagged) or a unified page-table cache (UPTC, tagged by PTE
// physical address).
//
// With prmb_slots_per_ptw == 0 there is no PTS: every TLB miss needs its own
// walker, so concurrent misses to one page walk redundantly, as in a
// conventional IOMMU.

#include <cstdint>
#include <deque>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "npusim/lru.hpp"
#include "npusim/memory_system.hpp"
#include "npusim/page_table.hpp"

namespace npusim {

enum class MmuMode : std::uint8_t { Oracle, Modeled };
enum class TranslationCacheKind : std::uint8_t { None, Tpr, Tpc, Uptc };
enum class RequestOrigin : std::uint8_t { DmaIA, DmaW, DmaOut, EmbeddingGather };

std::string to_string(MmuMode m);
std::string to_string(TranslationCacheKind k);
MmuMode parse_mmu_mode(const std::string &s);
TranslationCacheKind parse_translation_cache(const std::string &s);

struct MmuConfig {
    MmuMode mode = MmuMode::Modeled;
    std::uint32_t tlb_entries = 2048;
    Cycle tlb_hit_latency = 5;
    std::uint32_t num_ptws = 8;
    std::uint32_t prmb_slots_per_ptw = 0;
    Cycle walk_cycles_per_level = 100;
    Cycle pts_lookup_latency = 0;
    TranslationCacheKind translation_cache = TranslationCacheKind::None;
    std::uint32_t translation_cache_entries = 1; // TPC/UPTC capacity; TPR is always 1 per walker

    /// Zero-latency, infinite-throughput reference MMU.
    static MmuConfig oracle();
    /// Conventional IOMMU: 8 walkers, no merging, no path caching.
    static MmuConfig iommu_baseline();
    /// 128 walkers with 32 merge slots each and a per-walker TPR.
    static MmuConfig throughput_centric();

    void validate() const;
};

struct TranslationRequest {
    std::uint64_t id = 0;
    Vpn vpn = 0;
    Cycle issue_cycle = 0;
    RequestOrigin origin = RequestOrigin::DmaW;
};

enum class CompletionPath : std::uint8_t { Oracle, TlbHit, Walk, Merged };

struct TranslationCompletion {
    std::uint64_t id = 0;
    Vpn vpn = 0;
    Cycle cycle = 0;
    std::optional<FrameNumber> frame; // empty on a page fault
    int fault_level = 0;              // radix level of the absent entry, 0 if none
    CompletionPath path = CompletionPath::TlbHit;

    bool fault() const { return !frame.has_value(); }
};

enum class SubmitOutcome : std::uint8_t { AcceptedTlbHit, AcceptedMerged, AcceptedNewWalk, Blocked };

struct SubmitResult {
    SubmitOutcome outcome = SubmitOutcome::Blocked;
    Cycle done_cycle = 0; // TLB hits / oracle only
    std::uint32_t ptw = 0;

    bool accepted() const { return outcome != SubmitOutcome::Blocked; }
};

struct TranslationStats {
    std::uint64_t submissions = 0;
    std::uint64_t completions = 0;
    std::uint64_t tlb_hits = 0;
    std::uint64_t tlb_misses = 0;
    std::uint64_t tlb_fills = 0;
    std::uint64_t pts_merges = 0;
    std::uint64_t prmb_drains = 0;
    std::uint64_t walks_started = 0;
    std::uint64_t walks_completed = 0;
    std::uint64_t walk_memory_transactions = 0;
    std::uint64_t blocked_cycles = 0;
    std::uint64_t faults = 0;
    // translation-path cache activity
    std::uint64_t path_probes = 0;
    std::uint64_t path_fills = 0;
    std::uint64_t path_hit_l4 = 0;
    std::uint64_t path_hit_l3 = 0;
    std::uint64_t path_hit_l2 = 0;

    double tlb_hit_rate() const;
    TranslationStats &operator+=(const TranslationStats &o);
    TranslationStats &operator-=(const TranslationStats &o);
};

/// Fully associative, strict-LRU TLB.
class Tlb {
  public:
    explicit Tlb(std::size_t entries) : map_(entries) {}

    std::optional<FrameNumber> lookup(Vpn vpn) { return map_.touch(vpn); }
    bool contains(Vpn vpn) const { return map_.contains(vpn); }
    void insert(Vpn vpn, FrameNumber frame) { map_.insert(vpn, frame); }
    bool invalidate(Vpn vpn) { return map_.erase(vpn); }
    std::size_t size() const { return map_.size(); }
    std::size_t capacity() const { return map_.capacity(); }
    /// Resident VPNs, MRU first.
    std::vector<Vpn> lru_order() const;

  private:
    LruMap<Vpn, FrameNumber> map_;
};

/// Number of upper radix levels (from L4 down) on which two path tags agree.
/// A path tag is vpn >> 9: (l4,l3,l2) for 4KB pages, (l4,l3) for 2MB pages.
int matching_path_levels(std::uint64_t tag_a, std::uint64_t tag_b, PageSize ps);
constexpr std::uint64_t path_tag(Vpn vpn) { return vpn >> kIndexBits; }

class Mmu {
  public:
    /// `walk_memory` (optional) receives one read per PTE fetched by a walker;
    /// a level then takes max(walk_cycles_per_level, memory completion).
    Mmu(MmuConfig cfg, const PageTable &page_table, MemoryPort *walk_memory = nullptr);

    /// At most one call per requester per cycle. Blocked requests must be
    /// retried by the caller; nothing is queued for them.
    SubmitResult submit(const TranslationRequest &req, Cycle now);

    /// Advances to `now` and returns every completion due at or before it,
    /// in completion order. Calls must be monotonic; idle cycles may be skipped
    /// up to next_event_cycle().
    std::vector<TranslationCompletion> tick(Cycle now);

    std::optional<Cycle> next_event_cycle() const;
    /// Cycles a blocked requester waited without calling submit (skipped cycles).
    void add_blocked_cycles(std::uint64_t cycles) { stats_.blocked_cycles += cycles; }
    /// Drops a TLB entry after the page table changed under it.
    void invalidate(Vpn vpn) { tlb_.invalidate(vpn); }

    std::uint64_t next_request_id() const { return last_id_ ? *last_id_ + 1 : 0; }
    std::uint64_t in_flight() const { return stats_.submissions - stats_.completions; }
    const TranslationStats &stats() const { return stats_; }
    const MmuConfig &config() const { return cfg_; }
    const Tlb &tlb() const { return tlb_; }
    const PageTable &page_table() const { return *pt_; }

    std::size_t pts_entries() const { return pts_.size(); }
    std::size_t walking_ptws() const;
    /// PTS entries map one-to-one onto walking PTWs; PRMBs are empty on idle
    /// walkers; the TLB is within capacity.
    bool invariants_hold() const;

  private:
    enum class PtwState : std::uint8_t { Idle, Walking, Draining };
    enum class EventKind : std::uint8_t { LevelDone, Drain, Ready };

    struct Ptw {
        PtwState state = PtwState::Idle;
        Vpn vpn = 0;
        std::uint64_t lead_id = 0;
        std::vector<WalkStep> steps;   // full path as seen at walk start
        std::vector<PhysAddr> reads;   // PTEs fetched from memory
        std::size_t next_read = 0;
        std::deque<std::uint64_t> prmb;
        std::optional<FrameNumber> frame;
        int fault_level = 0;
        std::optional<std::uint64_t> tpr_tag;
        std::uint32_t tpr_node = 0;
    };

    struct Event {
        Cycle cycle;
        std::uint64_t seq;
        EventKind kind;
        std::uint32_t index; // walker id, or slot in ready_
        bool operator>(const Event &o) const { return cycle != o.cycle ? cycle > o.cycle : seq > o.seq; }
    };

    bool pts_enabled() const { return cfg_.prmb_slots_per_ptw > 0; }
    void schedule(Cycle c, EventKind kind, std::uint32_t index);
    void schedule_ready(TranslationCompletion c);
    void start_walk(std::uint32_t p, const TranslationRequest &req, Cycle now);
    void issue_read(std::uint32_t p, Cycle now);
    void finish_walk(std::uint32_t p, Cycle now, std::vector<TranslationCompletion> &out);
    void drain_one(std::uint32_t p, Cycle now, std::vector<TranslationCompletion> &out);
    void record_path_match(int levels);
    TranslationCompletion resolve_now(const TranslationRequest &req, Cycle now, CompletionPath path) const;

    MmuConfig cfg_;
    const PageTable *pt_;
    MemoryPort *walk_memory_;
    Tlb tlb_;
    std::vector<Ptw> ptws_;
    std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> free_ptws_;
    std::unordered_map<Vpn, std::uint32_t> pts_;
    LruMap<std::uint64_t, std::uint32_t> tpc_; // path tag -> leaf-level node
    LruMap<std::uint64_t, bool> uptc_;         // PTE physical address
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::vector<TranslationCompletion> ready_;
    std::vector<std::uint32_t> ready_free_;
    std::uint64_t seq_ = 0;
    std::optional<std::uint64_t> last_id_;
    TranslationStats stats_;
};

struct TraceRun {
    std::vector<TranslationCompletion> completions;
    Cycle start = 0;
    Cycle last_completion = 0;
    /// Cycles from the first submission through the last completion, inclusive.
    Cycle cycles = 0;
};

/// Submits `vpns` in order at one request per cycle starting at `start`,
/// retrying blocked requests, and runs until every translation has completed.
TraceRun run_translation_trace(Mmu &mmu, std::span<const Vpn> vpns, Cycle start = 0,
                               RequestOrigin origin = RequestOrigin::DmaW);

} // namespace npusim
