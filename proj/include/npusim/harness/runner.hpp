#pragma once

#include <optional>
#include <string>
#include <vector>

#include "npusim/harness/config.hpp"

namespace npusim::harness {

struct NumaOutcome {
    NumaStrategy strategy = NumaStrategy::BaselineCopy;
    LatencyBreakdown breakdown;
};

struct RunResult {
    std::string config_id;
    std::uint64_t seed = 0;
    std::string workload;
    MmuConfig mmu;
    PageSize page_size = PageSize::Small4K;
    Cycle total_cycles = 0;
    Cycle oracle_cycles = 0;
    TranslationStats stats;
    EnergyBreakdown energy;
    std::optional<NumaOutcome> numa;

    double mmu_overhead_pct() const;
    std::string summary() const;
};

/// Runs one configuration plus its oracle-MMU twin. Deterministic.
RunResult run_config(const SimConfig &cfg);

struct SweepAxis {
    std::string key;
    std::vector<std::string> values;

    /// "mmu.num_ptws=8,16,32"
    static SweepAxis parse(const std::string &spec);
};

/// Cross product of the axes (first axis outermost). Every point is
/// validated before anything runs; rows come back in declared order.
std::vector<SimConfig> expand_sweep(const SimConfig &base, const std::vector<SweepAxis> &axes);
std::vector<RunResult> run_all(const std::vector<SimConfig> &configs, unsigned jobs);

} // namespace npusim::harness
