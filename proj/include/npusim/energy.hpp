#pragma once

// Event-count energy model for translation activity. Constants are
// placeholders in picojoules; only ratios between configurations are meaningful.

#include <cstdint>

#include "npusim/translation_engine.hpp"

namespace npusim {

struct EnergyTable {
    double pj_per_walk_dram_access = 2000.0;
    double pj_per_prmb_access = 5.0;
    double pj_per_tlb_access = 10.0;
    double pj_per_tpr_access = 1.0; // also charged for TPC/UPTC probes and fills

    void validate() const;
};

struct EnergyEvents {
    std::uint64_t walk_dram_accesses = 0;
    std::uint64_t prmb_accesses = 0; // merges (writes) + drains (reads)
    std::uint64_t tlb_accesses = 0;  // lookups + fills
    std::uint64_t tpr_accesses = 0;  // path-cache probes + fills

    static EnergyEvents from(const TranslationStats &s);
};

struct EnergyBreakdown {
    double walk_dram_pj = 0;
    double prmb_pj = 0;
    double tlb_pj = 0;
    double tpr_pj = 0;

    double total_pj() const { return walk_dram_pj + prmb_pj + tlb_pj + tpr_pj; }
};

EnergyBreakdown account(const EnergyEvents &ev, const EnergyTable &table);
inline EnergyBreakdown account(const TranslationStats &s, const EnergyTable &table)
{
    return account(EnergyEvents::from(s), table);
}

} // namespace npusim
