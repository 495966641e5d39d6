#include "npusim/energy.hpp"

namespace npusim {

void EnergyTable::validate() const
{
    if (!(pj_per_walk_dram_access > 0) || !(pj_per_prmb_access > 0) || !(pj_per_tlb_access > 0) ||
        !(pj_per_tpr_access > 0))
        throw SimError("energy table entries must be positive");
}

EnergyEvents EnergyEvents::from(const TranslationStats &s)
{
    EnergyEvents ev;
    ev.walk_dram_accesses = s.walk_memory_transactions;
    ev.prmb_accesses = s.pts_merges + s.prmb_drains;
    ev.tlb_accesses = s.tlb_hits + s.tlb_misses + s.tlb_fills;
    ev.tpr_accesses = s.path_probes + s.path_fills;
    return ev;
}

EnergyBreakdown account(const EnergyEvents &ev, const EnergyTable &t)
{
    EnergyBreakdown e;
    e.walk_dram_pj = static_cast<double>(ev.walk_dram_accesses) * t.pj_per_walk_dram_access;
    e.prmb_pj = static_cast<double>(ev.prmb_accesses) * t.pj_per_prmb_access;
    e.tlb_pj = static_cast<double>(ev.tlb_accesses) * t.pj_per_tlb_access;
    e.tpr_pj = static_cast<double>(ev.tpr_accesses) * t.pj_per_tpr_access;
    return e;
}

} // namespace npusim
