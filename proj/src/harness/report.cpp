#include "npusim/harness/report.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include <fmt/format.h>

namespace npusim::harness {

namespace {

double num(const std::string &s) { return s.empty() ? 0.0 : std::stod(s); }

} // namespace

std::vector<ReportRow> build_report(const std::vector<CsvTable> &tables)
{
    std::size_t total_rows = 0;
    for (const auto &t : tables) {
        if (!t.header.empty() && t.header != tables.front().header)
            throw SimError("csv schema mismatch between inputs");
        total_rows += t.rows.size();
    }
    if (total_rows == 0)
        throw SimError("nothing to report: no result rows in the input");
    if (tables.front().header != csv_columns())
        throw SimError("csv schema does not match this build (csv_version " + std::to_string(kCsvVersion) + ")");

    const CsvTable &h = tables.front();
    const auto c_workload = h.column("workload"), c_mode = h.column("mode"), c_strategy = h.column("strategy"),
               c_ptw = h.column("num_ptws"), c_prmb = h.column("prmb_slots_per_ptw"),
               c_cache = h.column("translation_cache"), c_total = h.column("total_cycles"),
               c_oracle = h.column("oracle_cycles"), c_energy = h.column("energy_pj_total"),
               c_seed = h.column("seed");

    struct Raw {
        ReportRow row;
        std::string seed;
        double energy;
    };
    std::vector<Raw> raw;
    for (const auto &t : tables)
        for (const auto &r : t.rows) {
            Raw x;
            x.row.workload = r[c_workload];
            x.row.mode = r[c_mode];
            x.row.strategy = r[c_strategy];
            x.row.mmu = r[c_ptw] + "/" + r[c_prmb] + "/" + r[c_cache];
            x.row.total_cycles = num(r[c_total]);
            const double oracle = num(r[c_oracle]);
            x.row.perf_vs_oracle = x.row.total_cycles > 0 ? oracle / x.row.total_cycles : 0.0;
            x.row.overhead_pct = oracle > 0 ? (x.row.total_cycles / oracle - 1.0) * 100.0 : 0.0;
            x.seed = r[c_seed];
            x.energy = num(r[c_energy]);
            raw.push_back(std::move(x));
        }

    std::map<std::string, double> min_energy;
    std::map<std::pair<std::string, std::string>, double> baseline;
    for (const auto &x : raw) {
        if (x.energy > 0) {
            auto [it, fresh] = min_energy.emplace(x.row.workload, x.energy);
            if (!fresh)
                it->second = std::min(it->second, x.energy);
        }
        if (x.row.strategy == "baseline_copy")
            baseline.emplace(std::pair{x.row.workload, x.seed}, x.row.total_cycles);
    }

    std::vector<ReportRow> out;
    for (auto &x : raw) {
        if (auto it = min_energy.find(x.row.workload); it != min_energy.end() && x.energy > 0)
            x.row.energy_ratio = x.energy / it->second;
        if (!x.row.strategy.empty()) {
            if (auto it = baseline.find({x.row.workload, x.seed}); it != baseline.end() && it->second > 0)
                x.row.reduction_vs_baseline_pct = (1.0 - x.row.total_cycles / it->second) * 100.0;
        }
        out.push_back(std::move(x.row));
    }
    return out;
}

std::string render_report(const std::vector<ReportRow> &rows)
{
    std::string s = fmt::format("{:<40} {:<8} {:<14} {:<16} {:>14} {:>10} {:>12} {:>9} {:>11}\n", "workload", "mode",
                                "strategy", "ptw/prmb/cache", "total_cycles", "vs_oracle", "overhead_%",
                                "energy_x", "reduction_%");
    for (const auto &r : rows) {
        s += fmt::format("{:<40} {:<8} {:<14} {:<16} {:>14.0f} {:>10.4f} {:>12.2f} {:>9.3f} {:>11}\n", r.workload,
                         r.mode, r.strategy.empty() ? "-" : r.strategy, r.mmu, r.total_cycles, r.perf_vs_oracle,
                         r.overhead_pct, r.energy_ratio,
                         r.reduction_vs_baseline_pct ? fmt::format("{:.1f}", *r.reduction_vs_baseline_pct) : "-");
    }
    return s;
}

} // namespace npusim::harness
