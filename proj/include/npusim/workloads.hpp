#pragma once

// Dense layer suites (stand-in shapes from public CNN/RNN families) and
// sparse embedding gather traces with model-parallel table placement.

#include <cstdint>
#include <string>
#include <vector>

#include "npusim/npu_core.hpp"

namespace npusim {

/// Convolution lowered to a GEMM (im2col): M = out_h*out_w, K = r*s*c, N = k.
struct ConvShape {
    std::uint64_t h = 1, w = 1, c = 1; // input
    std::uint64_t r = 1, s = 1;        // filter
    std::uint64_t k = 1;               // output channels
    std::uint64_t stride = 1, pad = 0;

    GemmShape lower() const;
};

std::vector<std::string> dense_suite_names();
/// `name` is a suite name with an optional batch suffix "-bNN" (b01 default),
/// e.g. "gemv-rnn-b08". Layers get disjoint segment slots.
std::vector<LayerConfig> dense_suite(const std::string &name, const NpuConfig &npu);

enum class IndexDistribution : std::uint8_t { Uniform, Zipf, Sequential };
std::string to_string(IndexDistribution d);
IndexDistribution parse_index_distribution(const std::string &s);

struct EmbeddingTableSpec {
    std::uint64_t rows = 1;
    std::uint32_t embedding_bytes = 256;
};

struct EmbeddingModel {
    std::vector<EmbeddingTableSpec> tables;
    std::uint32_t lookups_per_sample = 1; // per table
    std::uint32_t batch = 64;             // samples per NPU
    IndexDistribution distribution = IndexDistribution::Uniform;
    double zipf_exponent = 1.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct Placement {
    std::uint32_t num_npus = 1;
    std::vector<std::uint32_t> owner; // table -> npu

    static Placement round_robin(std::size_t tables, std::uint32_t num_npus);
    void validate(std::size_t tables) const;
};

struct Gather {
    std::uint32_t table = 0;
    std::uint64_t row = 0;
    std::uint32_t owner = 0;
};

/// Per-NPU gather lists: for each NPU, sample, table and lookup in that order.
std::vector<std::vector<Gather>> gather_trace(const EmbeddingModel &model, const Placement &placement);

/// Table t occupies default segment slot first_slot + t.
AddressLayout embedding_layout(const EmbeddingModel &model, unsigned first_slot = 0);
VirtAddr gather_va(const AddressLayout &layout, const EmbeddingModel &model, const Gather &g);

} // namespace npusim
