#include "npusim/memory_system.hpp"

#include <algorithm>

namespace npusim {

BandwidthMeter::BandwidthMeter(std::uint64_t bytes_per_cycle) : bytes_per_cycle_(bytes_per_cycle)
{
    if (bytes_per_cycle == 0)
        throw SimError("bandwidth must be positive");
}

std::uint64_t BandwidthMeter::reserve(std::uint64_t bytes, Cycle now)
{
    const std::uint64_t start = std::max(now * bytes_per_cycle_, cursor_);
    cursor_ = start + bytes;
    total_bytes_ += bytes;
    return cursor_;
}

void DramConfig::validate() const
{
    if (channels == 0)
        throw SimError("memory.channels must be >= 1");
    if (bandwidth == 0)
        throw SimError("memory.bandwidth must be > 0");
}

Dram::Dram(DramConfig cfg) : cfg_(cfg), meter_((cfg.validate(), cfg.bandwidth)), channel_bytes_(cfg.channels, 0) {}

Cycle Dram::issue(std::uint64_t bytes, Cycle now, std::uint32_t channel)
{
    if (bytes == 0)
        throw SimError("DRAM transaction of 0 bytes");
    const std::uint64_t end = meter_.reserve(bytes, now);
    ++transactions_;
    channel_bytes_[channel % cfg_.channels] += bytes;
    return (end - 1) / cfg_.bandwidth + cfg_.access_latency;
}

Cycle Dram::read(PhysAddr addr, std::uint32_t bytes, Cycle now)
{
    return issue(bytes, now, static_cast<std::uint32_t>((addr.value >> 12) % cfg_.channels));
}

std::string to_string(LinkKind k) { return k == LinkKind::PcieCpuNpu ? "pcie" : "nvlink"; }

void LinkConfig::validate() const
{
    if (bandwidth == 0)
        throw SimError("link bandwidth must be > 0");
}

Link::Link(LinkConfig cfg) : cfg_(cfg), meter_((cfg.validate(), cfg.bandwidth)) {}

Cycle Link::transfer(std::uint64_t bytes, Cycle now)
{
    if (bytes == 0)
        throw SimError("link transfer of 0 bytes");
    const std::uint64_t end = meter_.reserve(bytes, now);
    return ceil_div(end, cfg_.bandwidth) + cfg_.numa_latency;
}

} // namespace npusim
