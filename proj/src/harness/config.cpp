#include "npusim/harness/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "npusim/rng.hpp"

extern char **environ;

namespace npusim::harness {

std::string WorkloadConfig::name() const
{
    if (kind == WorkloadKind::Dense)
        return suite;
    return fmt::format("embedding-{}-t{}x{}-b{}-n{}", to_string(distribution), num_tables, table_rows, batch,
                       num_npus);
}

ConfigError::ConfigError(std::vector<std::string> problems)
    : SimError([&] {
          std::string msg = "invalid configuration:";
          for (const auto &p : problems)
              msg += "\n  " + p;
          return msg;
      }()),
      problems_(std::move(problems))
{
}

namespace {

template <class T>
T parse_unsigned(const std::string &s)
{
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw SimError("expected an unsigned integer, got '" + s + "'");
    if (v > std::numeric_limits<T>::max())
        throw SimError("value '" + s + "' out of range");
    return static_cast<T>(v);
}

double parse_double(const std::string &s)
{
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    double v = 0;
    in >> v;
    if (in.fail() || !in.eof() || !std::isfinite(v))
        throw SimError("expected a number, got '" + s + "'");
    return v;
}

bool parse_bool(const std::string &s)
{
    std::string l = s;
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "true" || l == "yes" || l == "on" || l == "1")
        return true;
    if (l == "false" || l == "no" || l == "off" || l == "0")
        return false;
    throw SimError("expected true or false, got '" + s + "'");
}

template <class T, class Ref>
ConfigKey uint_key(std::string path, Ref ref)
{
    return {std::move(path), "uint",
            [ref](const SimConfig &c) { return std::to_string(ref(const_cast<SimConfig &>(c))); },
            [ref](SimConfig &c, const std::string &v) { ref(c) = parse_unsigned<T>(v); }};
}

template <class Ref>
ConfigKey bool_key(std::string path, Ref ref)
{
    return {std::move(path), "bool",
            [ref](const SimConfig &c) { return std::string(ref(const_cast<SimConfig &>(c)) ? "true" : "false"); },
            [ref](SimConfig &c, const std::string &v) { ref(c) = parse_bool(v); }};
}

template <class Ref>
ConfigKey double_key(std::string path, Ref ref)
{
    return {std::move(path), "double",
            [ref](const SimConfig &c) { return fmt::format("{}", ref(const_cast<SimConfig &>(c))); },
            [ref](SimConfig &c, const std::string &v) { ref(c) = parse_double(v); }};
}

template <class Ref>
ConfigKey string_key(std::string path, Ref ref)
{
    return {std::move(path), "string", [ref](const SimConfig &c) { return ref(const_cast<SimConfig &>(c)); },
            [ref](SimConfig &c, const std::string &v) { ref(c) = v; }};
}

template <class Ref, class ToS, class Parse>
ConfigKey enum_key(std::string path, std::string choices, Ref ref, ToS to_s, Parse parse)
{
    return {std::move(path), std::move(choices),
            [ref, to_s](const SimConfig &c) { return to_s(ref(const_cast<SimConfig &>(c))); },
            [ref, parse](SimConfig &c, const std::string &v) { ref(c) = parse(v); }};
}

std::string frame_policy_str(FramePolicy p) { return p == FramePolicy::Sequential ? "sequential" : "shuffled"; }
FramePolicy parse_frame_policy(const std::string &s)
{
    if (s == "sequential")
        return FramePolicy::Sequential;
    if (s == "shuffled")
        return FramePolicy::ShuffledSeeded;
    throw SimError("expected sequential or shuffled, got '" + s + "'");
}

std::string workload_kind_str(WorkloadKind k) { return k == WorkloadKind::Dense ? "dense" : "embedding"; }
WorkloadKind parse_workload_kind(const std::string &s)
{
    if (s == "dense")
        return WorkloadKind::Dense;
    if (s == "embedding")
        return WorkloadKind::Embedding;
    throw SimError("expected dense or embedding, got '" + s + "'");
}

LinkKind parse_link_kind(const std::string &s)
{
    if (s == "pcie")
        return LinkKind::PcieCpuNpu;
    if (s == "nvlink")
        return LinkKind::NvlinkNpuNpu;
    throw SimError("expected pcie or nvlink, got '" + s + "'");
}

std::vector<ConfigKey> build_keys()
{
    using C = SimConfig &;
    std::vector<ConfigKey> k;
    k.push_back({"schema_version", "int", [](const SimConfig &c) { return std::to_string(c.schema_version); },
                 [](SimConfig &c, const std::string &v) { c.schema_version = parse_unsigned<int>(v); }});

    k.push_back(uint_key<std::uint32_t>("npu.array_dim", [](C c) -> auto & { return c.npu.array_dim; }));
    k.push_back(uint_key<std::uint64_t>("npu.spm_activation_bytes",
                                        [](C c) -> auto & { return c.npu.spm_activation_bytes; }));
    k.push_back(uint_key<std::uint64_t>("npu.spm_weight_bytes", [](C c) -> auto & { return c.npu.spm_weight_bytes; }));
    k.push_back(uint_key<std::uint32_t>("npu.dma_txn_bytes", [](C c) -> auto & { return c.npu.dma_txn_bytes; }));
    k.push_back(uint_key<std::uint32_t>("npu.element_bytes", [](C c) -> auto & { return c.npu.element_bytes; }));
    k.push_back(bool_key("npu.dma_reuse_window", [](C c) -> auto & { return c.npu.dma_reuse_window; }));
    k.push_back(bool_key("npu.mirror_output_writes", [](C c) -> auto & { return c.npu.mirror_output_writes; }));

    k.push_back(enum_key(
        "mmu.mode", "oracle|modeled", [](C c) -> auto & { return c.mmu.mode; },
        [](MmuMode m) { return to_string(m); }, parse_mmu_mode));
    k.push_back(uint_key<std::uint32_t>("mmu.tlb_entries", [](C c) -> auto & { return c.mmu.tlb_entries; }));
    k.push_back(uint_key<Cycle>("mmu.tlb_hit_latency", [](C c) -> auto & { return c.mmu.tlb_hit_latency; }));
    k.push_back(uint_key<std::uint32_t>("mmu.num_ptws", [](C c) -> auto & { return c.mmu.num_ptws; }));
    k.push_back(
        uint_key<std::uint32_t>("mmu.prmb_slots_per_ptw", [](C c) -> auto & { return c.mmu.prmb_slots_per_ptw; }));
    k.push_back(uint_key<Cycle>("mmu.walk_cycles_per_level", [](C c) -> auto & { return c.mmu.walk_cycles_per_level; }));
    k.push_back(uint_key<Cycle>("mmu.pts_lookup_latency", [](C c) -> auto & { return c.mmu.pts_lookup_latency; }));
    k.push_back(enum_key(
        "mmu.translation_cache", "none|tpr|tpc|uptc", [](C c) -> auto & { return c.mmu.translation_cache; },
        [](TranslationCacheKind t) { return to_string(t); }, parse_translation_cache));
    k.push_back(uint_key<std::uint32_t>("mmu.translation_cache_entries",
                                        [](C c) -> auto & { return c.mmu.translation_cache_entries; }));
    k.push_back(enum_key(
        "mmu.page_size", "4k|2m", [](C c) -> auto & { return c.page_size; },
        [](PageSize p) { return to_string(p); }, parse_page_size));
    k.push_back(enum_key(
        "mmu.frame_policy", "sequential|shuffled", [](C c) -> auto & { return c.frame_policy; }, frame_policy_str,
        parse_frame_policy));

    k.push_back(uint_key<std::uint32_t>("memory.channels", [](C c) -> auto & { return c.memory.channels; }));
    k.push_back(uint_key<std::uint64_t>("memory.bandwidth", [](C c) -> auto & { return c.memory.bandwidth; }));
    k.push_back(uint_key<Cycle>("memory.access_latency", [](C c) -> auto & { return c.memory.access_latency; }));
    k.push_back(
        bool_key("memory.charge_walk_bandwidth", [](C c) -> auto & { return c.memory.charge_walk_bandwidth; }));

    k.push_back(uint_key<std::uint64_t>("links.pcie_bandwidth", [](C c) -> auto & { return c.pcie.bandwidth; }));
    k.push_back(uint_key<std::uint64_t>("links.nvlink_bandwidth", [](C c) -> auto & { return c.nvlink.bandwidth; }));
    // one NUMA latency for both link kinds
    k.push_back({"links.numa_latency", "uint", [](const SimConfig &c) { return std::to_string(c.pcie.numa_latency); },
                 [](SimConfig &c, const std::string &v) {
                     c.pcie.numa_latency = c.nvlink.numa_latency = parse_unsigned<Cycle>(v);
                 }});

    k.push_back(enum_key(
        "workload.kind", "dense|embedding", [](C c) -> auto & { return c.workload.kind; }, workload_kind_str,
        parse_workload_kind));
    k.push_back(string_key("workload.suite", [](C c) -> auto & { return c.workload.suite; }));
    k.push_back(uint_key<std::uint32_t>("workload.num_npus", [](C c) -> auto & { return c.workload.num_npus; }));
    k.push_back(uint_key<std::uint32_t>("workload.num_tables", [](C c) -> auto & { return c.workload.num_tables; }));
    k.push_back(uint_key<std::uint64_t>("workload.table_rows", [](C c) -> auto & { return c.workload.table_rows; }));
    k.push_back(
        uint_key<std::uint32_t>("workload.embedding_bytes", [](C c) -> auto & { return c.workload.embedding_bytes; }));
    k.push_back(uint_key<std::uint32_t>("workload.lookups_per_sample",
                                        [](C c) -> auto & { return c.workload.lookups_per_sample; }));
    k.push_back(uint_key<std::uint32_t>("workload.batch", [](C c) -> auto & { return c.workload.batch; }));
    k.push_back(enum_key(
        "workload.distribution", "uniform|zipf|sequential", [](C c) -> auto & { return c.workload.distribution; },
        [](IndexDistribution d) { return to_string(d); }, parse_index_distribution));
    k.push_back(double_key("workload.zipf_exponent", [](C c) -> auto & { return c.workload.zipf_exponent; }));
    k.push_back(enum_key(
        "workload.strategy", "baseline_copy|numa_slow|numa_fast|demand_paging",
        [](C c) -> auto & { return c.workload.strategy; }, [](NumaStrategy s) { return to_string(s); },
        parse_numa_strategy));
    k.push_back(uint_key<std::uint32_t>("workload.self_npu", [](C c) -> auto & { return c.workload.self_npu; }));
    k.push_back(
        bool_key("workload.per_embedding_copy", [](C c) -> auto & { return c.workload.per_embedding_copy; }));
    k.push_back(uint_key<Cycle>("workload.fault_overhead", [](C c) -> auto & { return c.workload.fault_overhead; }));
    k.push_back(enum_key(
        "workload.migration_link", "pcie|nvlink", [](C c) -> auto & { return c.workload.migration_link; },
        [](LinkKind l) { return to_string(l); }, parse_link_kind));

    k.push_back(
        double_key("energy.pj_per_walk_dram_access", [](C c) -> auto & { return c.energy.pj_per_walk_dram_access; }));
    k.push_back(double_key("energy.pj_per_prmb_access", [](C c) -> auto & { return c.energy.pj_per_prmb_access; }));
    k.push_back(double_key("energy.pj_per_tlb_access", [](C c) -> auto & { return c.energy.pj_per_tlb_access; }));
    k.push_back(double_key("energy.pj_per_tpr_access", [](C c) -> auto & { return c.energy.pj_per_tpr_access; }));

    k.push_back(uint_key<std::uint64_t>("seeds.master", [](C c) -> auto & { return c.master_seed; }));
    return k;
}

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

} // namespace

const std::vector<ConfigKey> &config_keys()
{
    static const std::vector<ConfigKey> keys = build_keys();
    return keys;
}

const ConfigKey *find_key(const std::string &path)
{
    for (const auto &k : config_keys())
        if (k.path == path)
            return &k;
    return nullptr;
}

void set_key(SimConfig &cfg, const std::string &path, const std::string &value)
{
    const ConfigKey *k = find_key(path);
    if (!k)
        throw ConfigError({path + ": unknown key"});
    try {
        k->set(cfg, value);
    } catch (const ConfigError &) {
        throw;
    } catch (const SimError &e) {
        throw ConfigError({path + ": " + e.what()});
    }
}

std::string get_key(const SimConfig &cfg, const std::string &path)
{
    const ConfigKey *k = find_key(path);
    if (!k)
        throw ConfigError({path + ": unknown key"});
    return k->get(cfg);
}

void SimConfig::validate() const
{
    std::vector<std::string> errs;
    auto check = [&](bool ok, const char *key, const std::string &what) {
        if (!ok)
            errs.push_back(std::string(key) + ": " + what);
    };
    check(schema_version == kSchemaVersion, "schema_version",
          "unsupported version " + std::to_string(schema_version) + " (expected " +
              std::to_string(kSchemaVersion) + ")");
    check(npu.array_dim >= 1, "npu.array_dim", "must be >= 1");
    check(npu.spm_activation_bytes > 0, "npu.spm_activation_bytes", "must be > 0");
    check(npu.spm_weight_bytes > 0, "npu.spm_weight_bytes", "must be > 0");
    check(is_pow2(npu.dma_txn_bytes) && npu.dma_txn_bytes <= 4096, "npu.dma_txn_bytes",
          "must be a power of two <= 4096");
    check(npu.element_bytes == 1 || npu.element_bytes == 2 || npu.element_bytes == 4, "npu.element_bytes",
          "must be 1, 2 or 4");
    if (mmu.mode == MmuMode::Modeled) {
        check(mmu.num_ptws >= 1, "mmu.num_ptws", "must be >= 1");
        check(mmu.walk_cycles_per_level >= 1, "mmu.walk_cycles_per_level", "must be >= 1");
        check(!(mmu.translation_cache == TranslationCacheKind::Tpc ||
                mmu.translation_cache == TranslationCacheKind::Uptc) ||
                  mmu.translation_cache_entries >= 1,
              "mmu.translation_cache_entries", "must be >= 1 for tpc/uptc");
    }
    check(memory.channels >= 1, "memory.channels", "must be >= 1");
    check(memory.bandwidth > 0, "memory.bandwidth", "must be > 0");
    check(pcie.bandwidth > 0, "links.pcie_bandwidth", "must be > 0");
    check(nvlink.bandwidth > 0, "links.nvlink_bandwidth", "must be > 0");

    const WorkloadConfig &w = workload;
    if (w.kind == WorkloadKind::Dense) {
        try {
            dense_suite(w.suite, npu);
        } catch (const SimError &e) {
            errs.push_back(std::string("workload.suite: ") + e.what());
        }
    } else {
        check(w.num_npus >= 1 && w.num_npus <= 254, "workload.num_npus", "must be in 1..254");
        check(w.self_npu < w.num_npus, "workload.self_npu", "must be < workload.num_npus");
        check(w.num_tables >= 1, "workload.num_tables", "must be >= 1");
        check(w.table_rows >= 1 && w.table_rows >= w.lookups_per_sample, "workload.table_rows",
              "must be >= 1 and >= lookups_per_sample");
        check(is_pow2(w.embedding_bytes) && w.embedding_bytes <= 4096, "workload.embedding_bytes",
              "must be a power of two <= 4096");
        check(w.lookups_per_sample >= 1, "workload.lookups_per_sample", "must be >= 1");
        check(w.batch >= 1, "workload.batch", "must be >= 1");
        check(w.zipf_exponent > 0, "workload.zipf_exponent", "must be > 0");
    }
    check(energy.pj_per_walk_dram_access > 0, "energy.pj_per_walk_dram_access", "must be > 0");
    check(energy.pj_per_prmb_access > 0, "energy.pj_per_prmb_access", "must be > 0");
    check(energy.pj_per_tlb_access > 0, "energy.pj_per_tlb_access", "must be > 0");
    check(energy.pj_per_tpr_access > 0, "energy.pj_per_tpr_access", "must be > 0");
    if (!errs.empty())
        throw ConfigError(std::move(errs));
}

SimConfig parse_config(const std::string &yaml_text)
{
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception &e) {
        throw ConfigError({std::string("yaml: ") + e.what()});
    }
    SimConfig cfg;
    std::vector<std::string> errs;
    if (!root.IsMap())
        throw ConfigError({"<root>: expected a mapping of sections"});
    if (!root["schema_version"])
        errs.push_back("schema_version: missing");

    auto apply = [&](const std::string &path, const YAML::Node &n) {
        if (!n.IsScalar()) {
            errs.push_back(path + (find_key(path) ? ": expected a scalar value" : ": unknown key"));
            return;
        }
        try {
            set_key(cfg, path, n.Scalar());
        } catch (const ConfigError &e) {
            errs.insert(errs.end(), e.problems().begin(), e.problems().end());
        }
    };

    for (const auto &top : root) {
        const std::string section = top.first.as<std::string>();
        if (top.second.IsMap()) {
            for (const auto &leaf : top.second)
                apply(section + "." + leaf.first.as<std::string>(), leaf.second);
        } else if (top.second.IsNull()) {
            continue; // empty section keeps defaults
        } else {
            apply(section, top.second);
        }
    }
    // semantic checks on whatever did parse, so one run reports everything
    try {
        cfg.validate();
    } catch (const ConfigError &e) {
        errs.insert(errs.end(), e.problems().begin(), e.problems().end());
    }
    if (!errs.empty())
        throw ConfigError(std::move(errs));
    return cfg;
}

SimConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError({path + ": cannot open config file"});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

void apply_env_overrides(SimConfig &cfg, const char *const *env)
{
    if (!env)
        env = environ;
    const std::string prefix = kEnvPrefix;
    std::vector<std::string> errs;
    for (; env && *env; ++env) {
        const std::string var = *env;
        if (var.rfind(prefix, 0) != 0)
            continue;
        const auto eq = var.find('=');
        if (eq == std::string::npos)
            continue;
        std::string key = var.substr(prefix.size(), eq - prefix.size());
        std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
        for (std::size_t p; (p = key.find("__")) != std::string::npos;)
            key.replace(p, 2, ".");
        try {
            set_key(cfg, key, var.substr(eq + 1));
        } catch (const ConfigError &e) {
            for (const auto &p : e.problems())
                errs.push_back(var.substr(0, eq) + " -> " + p);
        }
    }
    if (!errs.empty())
        throw ConfigError(std::move(errs));
    cfg.validate();
}

std::string dump_config(const SimConfig &cfg)
{
    YAML::Emitter out;
    out << YAML::BeginMap;
    std::string open;
    for (const auto &k : config_keys()) {
        const auto dot = k.path.find('.');
        if (dot == std::string::npos) {
            out << YAML::Key << k.path << YAML::Value << k.get(cfg);
            continue;
        }
        const std::string section = k.path.substr(0, dot);
        if (section != open) {
            if (!open.empty())
                out << YAML::EndMap;
            out << YAML::Key << section << YAML::Value << YAML::BeginMap;
            open = section;
        }
        out << YAML::Key << k.path.substr(dot + 1) << YAML::Value << k.get(cfg);
    }
    if (!open.empty())
        out << YAML::EndMap;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::string config_id(const SimConfig &cfg) { return fmt::format("{:016x}", fnv1a64(dump_config(cfg))); }

} // namespace npusim::harness
