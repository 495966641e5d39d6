#include "npusim/translation_engine.hpp"

#include <algorithm>

namespace npusim {

namespace {

constexpr std::uint32_t kWalkReadBytes = 64;

} // namespace

std::string to_string(MmuMode m) { return m == MmuMode::Oracle ? "oracle" : "modeled"; }

std::string to_string(TranslationCacheKind k)
{
    switch (k) {
    case TranslationCacheKind::None: return "none";
    case TranslationCacheKind::Tpr: return "tpr";
    case TranslationCacheKind::Tpc: return "tpc";
    case TranslationCacheKind::Uptc: return "uptc";
    }
    return "?";
}

MmuMode parse_mmu_mode(const std::string &s)
{
    if (s == "oracle")
        return MmuMode::Oracle;
    if (s == "modeled")
        return MmuMode::Modeled;
    throw SimError("unknown mmu mode '" + s + "' (expected oracle or modeled)");
}

TranslationCacheKind parse_translation_cache(const std::string &s)
{
    if (s == "none")
        return TranslationCacheKind::None;
    if (s == "tpr")
        return TranslationCacheKind::Tpr;
    if (s == "tpc")
        return TranslationCacheKind::Tpc;
    if (s == "uptc")
        return TranslationCacheKind::Uptc;
    throw SimError("unknown translation cache '" + s + "' (expected none, tpr, tpc or uptc)");
}

MmuConfig MmuConfig::oracle()
{
    MmuConfig c;
    c.mode = MmuMode::Oracle;
    return c;
}

MmuConfig MmuConfig::iommu_baseline() { return MmuConfig{}; }

MmuConfig MmuConfig::throughput_centric()
{
    MmuConfig c;
    c.num_ptws = 128;
    c.prmb_slots_per_ptw = 32;
    c.translation_cache = TranslationCacheKind::Tpr;
    return c;
}

void MmuConfig::validate() const
{
    if (mode == MmuMode::Oracle)
        return;
    if (num_ptws == 0)
        throw SimError("mmu.num_ptws must be >= 1");
    if (walk_cycles_per_level == 0)
        throw SimError("mmu.walk_cycles_per_level must be >= 1");
    if ((translation_cache == TranslationCacheKind::Tpc || translation_cache == TranslationCacheKind::Uptc) &&
        translation_cache_entries == 0)
        throw SimError("mmu.translation_cache_entries must be >= 1 for tpc/uptc");
}

double TranslationStats::tlb_hit_rate() const
{
    const std::uint64_t lookups = tlb_hits + tlb_misses;
    return lookups == 0 ? 0.0 : static_cast<double>(tlb_hits) / static_cast<double>(lookups);
}

TranslationStats &TranslationStats::operator+=(const TranslationStats &o)
{
    submissions += o.submissions;
    completions += o.completions;
    tlb_hits += o.tlb_hits;
    tlb_misses += o.tlb_misses;
    tlb_fills += o.tlb_fills;
    pts_merges += o.pts_merges;
    prmb_drains += o.prmb_drains;
    walks_started += o.walks_started;
    walks_completed += o.walks_completed;
    walk_memory_transactions += o.walk_memory_transactions;
    blocked_cycles += o.blocked_cycles;
    faults += o.faults;
    path_probes += o.path_probes;
    path_fills += o.path_fills;
    path_hit_l4 += o.path_hit_l4;
    path_hit_l3 += o.path_hit_l3;
    path_hit_l2 += o.path_hit_l2;
    return *this;
}

TranslationStats &TranslationStats::operator-=(const TranslationStats &o)
{
    submissions -= o.submissions;
    completions -= o.completions;
    tlb_hits -= o.tlb_hits;
    tlb_misses -= o.tlb_misses;
    tlb_fills -= o.tlb_fills;
    pts_merges -= o.pts_merges;
    prmb_drains -= o.prmb_drains;
    walks_started -= o.walks_started;
    walks_completed -= o.walks_completed;
    walk_memory_transactions -= o.walk_memory_transactions;
    blocked_cycles -= o.blocked_cycles;
    faults -= o.faults;
    path_probes -= o.path_probes;
    path_fills -= o.path_fills;
    path_hit_l4 -= o.path_hit_l4;
    path_hit_l3 -= o.path_hit_l3;
    path_hit_l2 -= o.path_hit_l2;
    return *this;
}

std::vector<Vpn> Tlb::lru_order() const
{
    std::vector<Vpn> out;
    out.reserve(map_.size());
    for (const auto &e : map_.entries())
        out.push_back(e.first);
    return out;
}

int matching_path_levels(std::uint64_t tag_a, std::uint64_t tag_b, PageSize ps)
{
    const int levels = walk_depth(ps) - 1;
    int matched = 0;
    for (int i = levels - 1; i >= 0; --i) {
        const unsigned shift = static_cast<unsigned>(i) * kIndexBits;
        if (((tag_a >> shift) & (kEntriesPerNode - 1)) != ((tag_b >> shift) & (kEntriesPerNode - 1)))
            break;
        ++matched;
    }
    return matched;
}

Mmu::Mmu(MmuConfig cfg, const PageTable &page_table, MemoryPort *walk_memory)
    : cfg_((cfg.validate(), cfg)), pt_(&page_table), walk_memory_(walk_memory), tlb_(cfg.tlb_entries),
      ptws_(cfg.mode == MmuMode::Oracle ? 0 : cfg.num_ptws),
      tpc_(cfg.translation_cache == TranslationCacheKind::Tpc ? cfg.translation_cache_entries : 0),
      uptc_(cfg.translation_cache == TranslationCacheKind::Uptc ? cfg.translation_cache_entries : 0)
{
    for (std::uint32_t p = 0; p < ptws_.size(); ++p)
        free_ptws_.push(p);
}

void Mmu::schedule(Cycle c, EventKind kind, std::uint32_t index) { events_.push(Event{c, seq_++, kind, index}); }

void Mmu::schedule_ready(TranslationCompletion c)
{
    std::uint32_t slot;
    if (!ready_free_.empty()) {
        slot = ready_free_.back();
        ready_free_.pop_back();
        ready_[slot] = c;
    } else {
        slot = static_cast<std::uint32_t>(ready_.size());
        ready_.push_back(c);
    }
    schedule(c.cycle, EventKind::Ready, slot);
}

TranslationCompletion Mmu::resolve_now(const TranslationRequest &req, Cycle now, CompletionPath path) const
{
    TranslationCompletion c{req.id, req.vpn, now, pt_->lookup(req.vpn), 0, path};
    if (!c.frame)
        c.fault_level = pt_->trace(vpn_base(req.vpn, pt_->page_size())).back().level;
    return c;
}

SubmitResult Mmu::submit(const TranslationRequest &req, Cycle now)
{
    if (last_id_ && req.id <= *last_id_)
        throw SimError("translation request ids must be strictly increasing");

    auto accept = [&] {
        last_id_ = req.id;
        ++stats_.submissions;
    };

    if (cfg_.mode == MmuMode::Oracle) {
        accept();
        ++stats_.tlb_hits;
        schedule_ready(resolve_now(req, now, CompletionPath::Oracle));
        return {SubmitOutcome::AcceptedTlbHit, now, 0};
    }

    if (auto frame = tlb_.lookup(req.vpn)) {
        accept();
        ++stats_.tlb_hits;
        const Cycle done = now + cfg_.tlb_hit_latency;
        schedule_ready(TranslationCompletion{req.id, req.vpn, done, frame, 0, CompletionPath::TlbHit});
        return {SubmitOutcome::AcceptedTlbHit, done, 0};
    }

    if (pts_enabled()) {
        auto it = pts_.find(req.vpn);
        if (it != pts_.end()) {
            Ptw &w = ptws_[it->second];
            if (w.prmb.size() < cfg_.prmb_slots_per_ptw) {
                accept();
                ++stats_.tlb_misses;
                ++stats_.pts_merges;
                w.prmb.push_back(req.id);
                return {SubmitOutcome::AcceptedMerged, 0, it->second};
            }
            ++stats_.blocked_cycles;
            return {SubmitOutcome::Blocked, 0, 0};
        }
    }

    if (!free_ptws_.empty()) {
        const std::uint32_t p = free_ptws_.top();
        free_ptws_.pop();
        accept();
        ++stats_.tlb_misses;
        start_walk(p, req, now);
        return {SubmitOutcome::AcceptedNewWalk, 0, p};
    }

    ++stats_.blocked_cycles;
    return {SubmitOutcome::Blocked, 0, 0};
}

void Mmu::record_path_match(int levels)
{
    ++stats_.path_probes;
    if (levels >= 1)
        ++stats_.path_hit_l4;
    if (levels >= 2)
        ++stats_.path_hit_l3;
    if (levels >= 3)
        ++stats_.path_hit_l2;
}

void Mmu::start_walk(std::uint32_t p, const TranslationRequest &req, Cycle now)
{
    const PageSize ps = pt_->page_size();
    Ptw &w = ptws_[p];
    w.state = PtwState::Walking;
    w.vpn = req.vpn;
    w.lead_id = req.id;
    w.prmb.clear();
    w.steps = pt_->trace(vpn_base(req.vpn, ps));
    w.reads.clear();
    w.next_read = 0;

    const std::uint64_t tag = path_tag(req.vpn);
    const int full_match = walk_depth(ps) - 1;
    const WalkStep &last = w.steps.back();
    const bool reaches_leaf_node = last.level == leaf_level(ps);
    bool skip_to_leaf = false;

    switch (cfg_.translation_cache) {
    case TranslationCacheKind::None: break;
    case TranslationCacheKind::Tpr: {
        const int levels = w.tpr_tag ? matching_path_levels(*w.tpr_tag, tag, ps) : 0;
        record_path_match(levels);
        skip_to_leaf = levels == full_match && reaches_leaf_node && w.tpr_node == last.node_id;
        break;
    }
    case TranslationCacheKind::Tpc: {
        int best = 0;
        for (const auto &e : tpc_.entries())
            best = std::max(best, matching_path_levels(e.first, tag, ps));
        record_path_match(best);
        if (auto node = tpc_.touch(tag))
            skip_to_leaf = reaches_leaf_node && *node == last.node_id;
        break;
    }
    case TranslationCacheKind::Uptc: {
        ++stats_.path_probes;
        for (const auto &s : w.steps) {
            if (uptc_.touch(s.pte_addr.value)) {
                if (s.level == 4)
                    ++stats_.path_hit_l4;
                else if (s.level == 3)
                    ++stats_.path_hit_l3;
                else if (s.level == 2)
                    ++stats_.path_hit_l2;
            } else {
                w.reads.push_back(s.pte_addr);
            }
        }
        break;
    }
    }

    if (cfg_.translation_cache != TranslationCacheKind::Uptc) {
        if (skip_to_leaf)
            w.reads.push_back(last.pte_addr);
        else
            for (const auto &s : w.steps)
                w.reads.push_back(s.pte_addr);
    }

    ++stats_.walks_started;
    stats_.walk_memory_transactions += w.reads.size();
    if (pts_enabled())
        pts_[req.vpn] = p;

    const Cycle t = now + cfg_.pts_lookup_latency;
    if (w.reads.empty())
        schedule(t, EventKind::LevelDone, p);
    else
        issue_read(p, t);
}

void Mmu::issue_read(std::uint32_t p, Cycle now)
{
    Ptw &w = ptws_[p];
    Cycle done = now + cfg_.walk_cycles_per_level;
    if (walk_memory_)
        done = std::max(done, walk_memory_->read(w.reads[w.next_read], kWalkReadBytes, now));
    schedule(done, EventKind::LevelDone, p);
}

void Mmu::finish_walk(std::uint32_t p, Cycle now, std::vector<TranslationCompletion> &out)
{
    const PageSize ps = pt_->page_size();
    Ptw &w = ptws_[p];
    w.frame = pt_->lookup(w.vpn);
    w.fault_level = w.frame ? 0 : pt_->trace(vpn_base(w.vpn, ps)).back().level;
    if (w.frame) {
        tlb_.insert(w.vpn, *w.frame);
        ++stats_.tlb_fills;
    }

    const WalkStep &last = w.steps.back();
    const bool reaches_leaf_node = last.level == leaf_level(ps);
    switch (cfg_.translation_cache) {
    case TranslationCacheKind::None: break;
    case TranslationCacheKind::Tpr:
        if (reaches_leaf_node) {
            w.tpr_tag = path_tag(w.vpn);
            w.tpr_node = last.node_id;
            ++stats_.path_fills;
        }
        break;
    case TranslationCacheKind::Tpc:
        if (reaches_leaf_node) {
            tpc_.insert(path_tag(w.vpn), last.node_id);
            ++stats_.path_fills;
        }
        break;
    case TranslationCacheKind::Uptc:
        for (const auto &s : w.steps) {
            const bool was_read = std::find(w.reads.begin(), w.reads.end(), s.pte_addr) != w.reads.end();
            if (was_read && s.entry.present()) {
                uptc_.insert(s.pte_addr.value, true);
                ++stats_.path_fills;
            }
        }
        break;
    }

    if (pts_enabled()) {
        auto it = pts_.find(w.vpn);
        if (it != pts_.end() && it->second == p)
            pts_.erase(it);
    }

    ++stats_.walks_completed;
    ++stats_.completions;
    if (!w.frame)
        ++stats_.faults;
    out.push_back(TranslationCompletion{w.lead_id, w.vpn, now, w.frame, w.fault_level, CompletionPath::Walk});

    if (!w.prmb.empty()) {
        w.state = PtwState::Draining;
        schedule(now + 1, EventKind::Drain, p);
    } else {
        w.state = PtwState::Idle;
        free_ptws_.push(p);
    }
}

void Mmu::drain_one(std::uint32_t p, Cycle now, std::vector<TranslationCompletion> &out)
{
    Ptw &w = ptws_[p];
    const std::uint64_t id = w.prmb.front();
    w.prmb.pop_front();
    ++stats_.prmb_drains;
    ++stats_.completions;
    if (!w.frame)
        ++stats_.faults;
    out.push_back(TranslationCompletion{id, w.vpn, now, w.frame, w.fault_level, CompletionPath::Merged});
    if (!w.prmb.empty()) {
        schedule(now + 1, EventKind::Drain, p);
    } else {
        w.state = PtwState::Idle;
        free_ptws_.push(p);
    }
}

std::vector<TranslationCompletion> Mmu::tick(Cycle now)
{
    std::vector<TranslationCompletion> out;
    while (!events_.empty() && events_.top().cycle <= now) {
        const Event e = events_.top();
        events_.pop();
        switch (e.kind) {
        case EventKind::LevelDone: {
            Ptw &w = ptws_[e.index];
            if (w.next_read < w.reads.size())
                ++w.next_read;
            if (w.next_read < w.reads.size())
                issue_read(e.index, e.cycle);
            else
                finish_walk(e.index, e.cycle, out);
            break;
        }
        case EventKind::Drain: drain_one(e.index, e.cycle, out); break;
        case EventKind::Ready: {
            const TranslationCompletion &c = ready_[e.index];
            ++stats_.completions;
            if (c.fault())
                ++stats_.faults;
            out.push_back(c);
            ready_free_.push_back(e.index);
            break;
        }
        }
    }
    return out;
}

std::optional<Cycle> Mmu::next_event_cycle() const
{
    if (events_.empty())
        return std::nullopt;
    return events_.top().cycle;
}

std::size_t Mmu::walking_ptws() const
{
    return static_cast<std::size_t>(
        std::count_if(ptws_.begin(), ptws_.end(), [](const Ptw &w) { return w.state == PtwState::Walking; }));
}

bool Mmu::invariants_hold() const
{
    if (tlb_.size() > tlb_.capacity())
        return false;
    for (const auto &w : ptws_)
        if (w.state == PtwState::Idle && !w.prmb.empty())
            return false;
    if (!pts_enabled())
        return pts_.empty();
    for (const auto &[vpn, p] : pts_)
        if (ptws_[p].state != PtwState::Walking || ptws_[p].vpn != vpn)
            return false;
    return pts_.size() == walking_ptws();
}

TraceRun run_translation_trace(Mmu &mmu, std::span<const Vpn> vpns, Cycle start, RequestOrigin origin)
{
    TraceRun run;
    run.start = start;
    run.completions.reserve(vpns.size());
    std::uint64_t id = mmu.next_request_id();
    std::size_t i = 0;
    Cycle now = start;
    auto collect = [&](Cycle c) {
        for (auto &comp : mmu.tick(c))
            run.completions.push_back(comp);
    };

    while (i < vpns.size() || mmu.in_flight() > 0) {
        collect(now);
        if (i < vpns.size()) {
            const SubmitResult r = mmu.submit(TranslationRequest{id, vpns[i], now, origin}, now);
            if (r.accepted()) {
                ++i;
                ++id;
                ++now;
                continue;
            }
            const auto next = mmu.next_event_cycle();
            if (!next)
                throw SimError("translation request blocked with no pending MMU events");
            const Cycle target = std::max(now + 1, *next);
            mmu.add_blocked_cycles(target - now - 1);
            now = target;
        } else {
            const auto next = mmu.next_event_cycle();
            if (!next)
                break;
            now = std::max(now, *next);
        }
    }
    collect(now);

    for (const auto &c : run.completions)
        run.last_completion = std::max(run.last_completion, c.cycle);
    run.cycles = run.completions.empty() ? 0 : run.last_completion + 1 - start;
    return run;
}

} // namespace npusim
