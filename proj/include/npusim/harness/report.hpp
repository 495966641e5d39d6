#pragma once

#include <optional>
#include <string>
#include <vector>

#include "npusim/harness/csv.hpp"

namespace npusim::harness {

struct ReportRow {
    std::string workload;
    std::string mode;
    std::string strategy;
    std::string mmu; // "ptw/prmb/cache"
    double total_cycles = 0;
    double perf_vs_oracle = 0;   // oracle_cycles / total_cycles
    double overhead_pct = 0;
    double energy_ratio = 0;     // vs the lowest-energy row of the same workload
    std::optional<double> reduction_vs_baseline_pct; // NUMA rows with a baseline_copy sibling
};

/// Throws SimError on empty input or mismatched headers.
std::vector<ReportRow> build_report(const std::vector<CsvTable> &tables);
std::string render_report(const std::vector<ReportRow> &rows);

} // namespace npusim::harness
