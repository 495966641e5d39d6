#pragma once

// Experiment configuration. The YAML document has sections npu, mmu, memory,
// links, workload, energy and seeds plus a schema_version key. Every leaf is
// registered under a dotted key ("mmu.num_ptws") used by sweeps and by
// environment overrides: NPUSIM_MMU__NUM_PTWS=64.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "npusim/energy.hpp"
#include "npusim/npu_core.hpp"
#include "npusim/numa_embedding.hpp"
#include "npusim/page_table.hpp"
#include "npusim/translation_engine.hpp"
#include "npusim/workloads.hpp"

namespace npusim::harness {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char *kEnvPrefix = "NPUSIM_";

enum class WorkloadKind : std::uint8_t { Dense, Embedding };

struct WorkloadConfig {
    WorkloadKind kind = WorkloadKind::Dense;
    std::string suite = "toy";
    // embedding gather
    std::uint32_t num_npus = 4;
    std::uint32_t num_tables = 8;
    std::uint64_t table_rows = 1'000'000;
    std::uint32_t embedding_bytes = 256;
    std::uint32_t lookups_per_sample = 1;
    std::uint32_t batch = 64;
    IndexDistribution distribution = IndexDistribution::Uniform;
    double zipf_exponent = 1.0;
    NumaStrategy strategy = NumaStrategy::NumaFast;
    std::uint32_t self_npu = 0;
    bool per_embedding_copy = false;
    Cycle fault_overhead = 0;
    LinkKind migration_link = LinkKind::NvlinkNpuNpu;

    std::string name() const;
};

struct SimConfig {
    int schema_version = kSchemaVersion;
    NpuConfig npu;
    MmuConfig mmu = MmuConfig::iommu_baseline();
    PageSize page_size = PageSize::Small4K;
    FramePolicy frame_policy = FramePolicy::Sequential;
    DramConfig memory;
    LinkConfig pcie = LinkConfig::pcie();
    LinkConfig nvlink = LinkConfig::nvlink();
    WorkloadConfig workload;
    EnergyTable energy;
    std::uint64_t master_seed = 1;

    /// Throws ConfigError listing every problem with its key path.
    void validate() const;
};

class ConfigError : public SimError {
  public:
    explicit ConfigError(std::vector<std::string> problems);
    const std::vector<std::string> &problems() const { return problems_; }

  private:
    std::vector<std::string> problems_;
};

struct ConfigKey {
    std::string path;
    std::string type; // uint, int, bool, double, string, or "a|b|c" for enums
    std::function<std::string(const SimConfig &)> get;
    std::function<void(SimConfig &, const std::string &)> set; // throws SimError on bad values
};

/// Every schema key, in document order.
const std::vector<ConfigKey> &config_keys();
const ConfigKey *find_key(const std::string &path);

/// Sets one dotted key from its textual value. Throws ConfigError.
void set_key(SimConfig &cfg, const std::string &path, const std::string &value);
std::string get_key(const SimConfig &cfg, const std::string &path);

SimConfig parse_config(const std::string &yaml_text);
SimConfig load_config(const std::string &path);
/// Applies NPUSIM_* variables from `env` (defaults to the process environment).
void apply_env_overrides(SimConfig &cfg, const char *const *env = nullptr);
/// Full effective configuration as YAML; parse_config(dump_config(c)) == c.
std::string dump_config(const SimConfig &cfg);
/// Stable identifier: FNV-1a of the dumped configuration, hex.
std::string config_id(const SimConfig &cfg);

} // namespace npusim::harness
