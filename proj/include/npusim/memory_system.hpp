#pragma once

// Fixed-latency, bandwidth-limited memory and interconnect models. Bandwidth
// is tracked as a byte cursor ("slot" = cycle * bytes_per_cycle + byte), so
// transfers smaller than one cycle's worth share a cycle and larger ones spill
// into the following cycles.

#include <cstdint>
#include <string>
#include <vector>

#include "npusim/address_space.hpp"

namespace npusim {

class BandwidthMeter {
  public:
    explicit BandwidthMeter(std::uint64_t bytes_per_cycle);

    /// Reserves `bytes` starting no earlier than `now`. Returns the end slot
    /// (one past the last byte).
    std::uint64_t reserve(std::uint64_t bytes, Cycle now);
    std::uint64_t bytes_per_cycle() const { return bytes_per_cycle_; }
    std::uint64_t bytes_reserved() const { return total_bytes_; }

  private:
    std::uint64_t bytes_per_cycle_;
    std::uint64_t cursor_ = 0;
    std::uint64_t total_bytes_ = 0;
};

/// Anything a page-table walker can read PTEs from.
class MemoryPort {
  public:
    virtual ~MemoryPort() = default;
    /// Returns the cycle at which the read data is available.
    virtual Cycle read(PhysAddr addr, std::uint32_t bytes, Cycle now) = 0;
};

struct DramConfig {
    std::uint32_t channels = 8;
    std::uint64_t bandwidth = 600; // bytes/cycle (600 GB/s at 1 GHz)
    Cycle access_latency = 100;
    bool charge_walk_bandwidth = true;

    void validate() const;
};

class Dram : public MemoryPort {
  public:
    explicit Dram(DramConfig cfg);

    /// Accepts a transaction no earlier than `now` and returns its completion:
    /// (cycle in which its last byte is accepted) + access_latency.
    Cycle issue(std::uint64_t bytes, Cycle now, std::uint32_t channel = 0);
    Cycle read(PhysAddr addr, std::uint32_t bytes, Cycle now) override;

    std::uint32_t channel_of(Vpn vpn) const { return static_cast<std::uint32_t>(vpn % cfg_.channels); }
    const DramConfig &config() const { return cfg_; }
    std::uint64_t bytes_transferred() const { return meter_.bytes_reserved(); }
    std::uint64_t transactions() const { return transactions_; }
    const std::vector<std::uint64_t> &channel_bytes() const { return channel_bytes_; }

  private:
    DramConfig cfg_;
    BandwidthMeter meter_;
    std::uint64_t transactions_ = 0;
    std::vector<std::uint64_t> channel_bytes_;
};

enum class LinkKind : std::uint8_t { PcieCpuNpu, NvlinkNpuNpu };

std::string to_string(LinkKind k);

struct LinkConfig {
    LinkKind kind = LinkKind::PcieCpuNpu;
    std::uint64_t bandwidth = 16; // bytes/cycle, per direction
    Cycle numa_latency = 150;

    static LinkConfig pcie() { return {LinkKind::PcieCpuNpu, 16, 150}; }
    static LinkConfig nvlink() { return {LinkKind::NvlinkNpuNpu, 160, 150}; }
    void validate() const;
};

/// One direction of a full-duplex link.
class Link {
  public:
    explicit Link(LinkConfig cfg);

    /// completion = start + numa_latency + ceil(bytes / bandwidth), where start
    /// is `now` on an idle link. Back-to-back transfers pipeline on bandwidth.
    Cycle transfer(std::uint64_t bytes, Cycle now);

    const LinkConfig &config() const { return cfg_; }
    std::uint64_t bytes_transferred() const { return meter_.bytes_reserved(); }

  private:
    LinkConfig cfg_;
    BandwidthMeter meter_;
};

} // namespace npusim
