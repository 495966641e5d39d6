#include "npusim/harness/csv.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

namespace npusim::harness {

const std::vector<std::string> &csv_columns()
{
    static const std::vector<std::string> cols = {
        "csv_version",        "config_id",         "seed",           "workload",
        "mode",               "page_size",         "num_ptws",       "prmb_slots_per_ptw",
        "tlb_entries",        "translation_cache", "total_cycles",   "oracle_cycles",
        "mmu_overhead_pct",   "tlb_hit_rate",      "walks_started",  "walk_mem_txns",
        "pts_merges",         "blocked_cycles",    "tpr_probes",     "tpr_hit_l4",
        "tpr_hit_l3",         "tpr_hit_l2",        "energy_pj_total", "energy_pj_walk_dram",
        "strategy",           "local_cycles",      "remote_cycles",  "remote_leg1_cycles",
        "staging_cycles",     "remote_leg2_cycles", "fault_handling_cycles", "migration_cycles",
        "migration_bytes",    "payload_bytes",     "faults",
    };
    return cols;
}

std::string csv_header()
{
    std::string s;
    for (const auto &c : csv_columns())
        s += (s.empty() ? "" : ",") + c;
    return s;
}

namespace {

double rate(std::uint64_t num, std::uint64_t den)
{
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

std::string csv_line(const RunResult &r)
{
    const TranslationStats &s = r.stats;
    std::vector<std::string> v = {
        std::to_string(kCsvVersion),
        r.config_id,
        std::to_string(r.seed),
        r.workload,
        to_string(r.mmu.mode),
        to_string(r.page_size),
        std::to_string(r.mmu.num_ptws),
        std::to_string(r.mmu.prmb_slots_per_ptw),
        std::to_string(r.mmu.tlb_entries),
        to_string(r.mmu.translation_cache),
        std::to_string(r.total_cycles),
        std::to_string(r.oracle_cycles),
        fmt::format("{:.4f}", r.mmu_overhead_pct()),
        fmt::format("{:.6f}", s.tlb_hit_rate()),
        std::to_string(s.walks_started),
        std::to_string(s.walk_memory_transactions),
        std::to_string(s.pts_merges),
        std::to_string(s.blocked_cycles),
        std::to_string(s.path_probes),
        fmt::format("{:.6f}", rate(s.path_hit_l4, s.path_probes)),
        fmt::format("{:.6f}", rate(s.path_hit_l3, s.path_probes)),
        fmt::format("{:.6f}", rate(s.path_hit_l2, s.path_probes)),
        fmt::format("{:.1f}", r.energy.total_pj()),
        fmt::format("{:.1f}", r.energy.walk_dram_pj),
    };
    if (r.numa) {
        const LatencyBreakdown &b = r.numa->breakdown;
        v.push_back(to_string(r.numa->strategy));
        v.push_back(std::to_string(b.local));
        v.push_back(std::to_string(b.remote));
        v.push_back(std::to_string(b.remote_leg1));
        v.push_back(std::to_string(b.staging));
        v.push_back(std::to_string(b.remote_leg2));
        v.push_back(std::to_string(b.fault_handling));
        v.push_back(std::to_string(b.migration_cycles));
        v.push_back(std::to_string(b.migration_bytes));
        v.push_back(std::to_string(b.payload_bytes));
        v.push_back(std::to_string(b.faults));
    } else {
        v.resize(csv_columns().size());
    }
    std::string line;
    for (std::size_t i = 0; i < v.size(); ++i)
        line += (i ? "," : "") + v[i];
    return line;
}

std::string to_csv(const std::vector<RunResult> &rows)
{
    std::string out = csv_header() + "\n";
    for (const auto &r : rows)
        out += csv_line(r) + "\n";
    return out;
}

std::size_t CsvTable::column(const std::string &name) const
{
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name)
            return i;
    throw SimError("csv has no column '" + name + "'");
}

namespace {

std::vector<std::string> split_line(const std::string &line)
{
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        out.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        if (comma == std::string::npos)
            return out;
        pos = comma + 1;
    }
}

} // namespace

CsvTable parse_csv(const std::string &text)
{
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (t.header.empty()) {
            t.header = split_line(line);
            continue;
        }
        auto row = split_line(line);
        if (row.size() != t.header.size())
            throw SimError(fmt::format("csv row {} has {} fields, header has {}", t.rows.size() + 1, row.size(),
                                       t.header.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

CsvTable read_csv(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw SimError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

} // namespace npusim::harness
