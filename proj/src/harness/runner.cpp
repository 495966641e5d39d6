#include "npusim/harness/runner.hpp"

#include <atomic>
#include <exception>
#include <thread>

#include <fmt/format.h>

#include "npusim/rng.hpp"

namespace npusim::harness {

namespace {

struct DenseOutcome {
    Cycle cycles = 0;
    TranslationStats stats;
};

// Each layer starts from a cold TLB and an idle memory system.
DenseOutcome run_dense(const SimConfig &cfg, const MmuConfig &mmu_cfg)
{
    const auto layers = dense_suite(cfg.workload.suite, cfg.npu);
    std::vector<Segment> segs;
    for (const auto &l : layers)
        for (const auto &s : l.segments())
            segs.push_back(s);
    const PageTable pt =
        PageTable::build(segs, cfg.page_size, FrameAllocation{cfg.frame_policy, split_seed(cfg.master_seed, "frames"), 0});
    DenseOutcome out;
    for (const auto &layer : layers) {
        Dram dram(cfg.memory);
        Mmu mmu(mmu_cfg, pt, cfg.memory.charge_walk_bandwidth ? &dram : nullptr);
        const RunStats rs = run_layer(layer, cfg.npu, mmu, dram);
        out.cycles += rs.total_cycles;
        out.stats += rs.mmu;
    }
    return out;
}

GatherWorkload make_gathers(const SimConfig &cfg)
{
    const WorkloadConfig &w = cfg.workload;
    EmbeddingModel m;
    m.tables.assign(w.num_tables, EmbeddingTableSpec{w.table_rows, w.embedding_bytes});
    m.lookups_per_sample = w.lookups_per_sample;
    m.batch = w.batch;
    m.distribution = w.distribution;
    m.zipf_exponent = w.zipf_exponent;
    m.seed = split_seed(cfg.master_seed, "embedding");
    return GatherWorkload::make(std::move(m), Placement::round_robin(w.num_tables, w.num_npus));
}

NumaConfig numa_config(const SimConfig &cfg, const MmuConfig &mmu)
{
    NumaConfig n;
    n.self_npu = cfg.workload.self_npu;
    n.mmu = mmu;
    n.dram = cfg.memory;
    n.cpu_dram = cfg.memory;
    n.pcie = cfg.pcie;
    n.nvlink = cfg.nvlink;
    n.per_embedding_copy = cfg.workload.per_embedding_copy;
    n.fault_overhead = cfg.workload.fault_overhead;
    n.migration_link = cfg.workload.migration_link;
    n.page_size = cfg.page_size;
    return n;
}

} // namespace

double RunResult::mmu_overhead_pct() const
{
    if (oracle_cycles == 0)
        return 0.0;
    return (static_cast<double>(total_cycles) / static_cast<double>(oracle_cycles) - 1.0) * 100.0;
}

std::string RunResult::summary() const
{
    std::string s = fmt::format("workload        {}\n", workload);
    s += fmt::format("mmu             {} ptw={} prmb={} tlb={} cache={} page={}\n", to_string(mmu.mode), mmu.num_ptws,
                     mmu.prmb_slots_per_ptw, mmu.tlb_entries, to_string(mmu.translation_cache),
                     to_string(page_size));
    s += fmt::format("total_cycles    {}\n", total_cycles);
    s += fmt::format("oracle_cycles   {}\n", oracle_cycles);
    s += fmt::format("mmu_overhead    {:.2f}%\n", mmu_overhead_pct());
    s += fmt::format("tlb_hit_rate    {:.4f}\n", stats.tlb_hit_rate());
    s += fmt::format("walks           {} ({} memory transactions, {} merges)\n", stats.walks_started,
                     stats.walk_memory_transactions, stats.pts_merges);
    s += fmt::format("energy          {:.1f} pJ (walk dram {:.1f})\n", energy.total_pj(), energy.walk_dram_pj);
    if (numa) {
        const auto &b = numa->breakdown;
        s += fmt::format("strategy        {}\n", to_string(numa->strategy));
        s += fmt::format("breakdown       local={} remote={} leg1={} staging={} leg2={} fault={} migration={}\n",
                         b.local, b.remote, b.remote_leg1, b.staging, b.remote_leg2, b.fault_handling,
                         b.migration_cycles);
        s += fmt::format("bytes           payload={} migrated={} faults={}\n", b.payload_bytes, b.migration_bytes,
                         b.faults);
    }
    return s;
}

RunResult run_config(const SimConfig &cfg)
{
    cfg.validate();
    RunResult r;
    r.config_id = config_id(cfg);
    r.seed = cfg.master_seed;
    r.workload = cfg.workload.name();
    r.mmu = cfg.mmu;
    r.page_size = cfg.page_size;

    if (cfg.workload.kind == WorkloadKind::Dense) {
        const DenseOutcome run = run_dense(cfg, cfg.mmu);
        r.total_cycles = run.cycles;
        r.stats = run.stats;
        r.oracle_cycles = cfg.mmu.mode == MmuMode::Oracle ? run.cycles : run_dense(cfg, MmuConfig::oracle()).cycles;
    } else {
        const GatherWorkload wl = make_gathers(cfg);
        const NumaStrategy s = cfg.workload.strategy;
        const LatencyBreakdown b = run_strategy(s, wl, numa_config(cfg, cfg.mmu));
        r.total_cycles = b.total;
        r.stats = b.mmu;
        r.oracle_cycles = (cfg.mmu.mode == MmuMode::Oracle || s == NumaStrategy::BaselineCopy)
                              ? b.total
                              : run_strategy(s, wl, numa_config(cfg, MmuConfig::oracle())).total;
        r.numa = NumaOutcome{s, b};
    }
    r.energy = account(r.stats, cfg.energy);
    return r;
}

SweepAxis SweepAxis::parse(const std::string &spec)
{
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size())
        throw ConfigError({"--sweep '" + spec + "': expected key=v1,v2,..."});
    SweepAxis a;
    a.key = spec.substr(0, eq);
    if (!find_key(a.key))
        throw ConfigError({a.key + ": unknown key"});
    std::size_t pos = eq + 1;
    while (pos <= spec.size()) {
        const auto comma = spec.find(',', pos);
        const std::string v = spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (v.empty())
            throw ConfigError({a.key + ": empty sweep value"});
        a.values.push_back(v);
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    return a;
}

std::vector<SimConfig> expand_sweep(const SimConfig &base, const std::vector<SweepAxis> &axes)
{
    std::vector<SimConfig> out{base};
    for (const auto &axis : axes) {
        std::vector<SimConfig> next;
        next.reserve(out.size() * axis.values.size());
        for (const auto &c : out)
            for (const auto &v : axis.values) {
                SimConfig x = c;
                set_key(x, axis.key, v);
                next.push_back(std::move(x));
            }
        out = std::move(next);
    }
    for (const auto &c : out)
        c.validate();
    return out;
}

std::vector<RunResult> run_all(const std::vector<SimConfig> &configs, unsigned jobs)
{
    std::vector<RunResult> results(configs.size());
    std::vector<std::exception_ptr> errors(configs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < configs.size();) {
            try {
                results[i] = run_config(configs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
        for (auto &t : pool)
            t.join();
    }
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
    return results;
}

} // namespace npusim::harness
