#include "npusim/workloads.hpp"

#include <map>

#include "npusim/rng.hpp"

namespace npusim {

GemmShape ConvShape::lower() const
{
    if (h + 2 * pad < r || w + 2 * pad < s || stride == 0)
        throw SimError("conv filter larger than padded input");
    const std::uint64_t oh = (h + 2 * pad - r) / stride + 1;
    const std::uint64_t ow = (w + 2 * pad - s) / stride + 1;
    return {oh * ow, r * s * c, k};
}

namespace {

struct NamedShape {
    const char *name;
    GemmShape shape;
};

const std::map<std::string, std::vector<NamedShape>> &suites()
{
    static const std::map<std::string, std::vector<NamedShape>> s = {
        {"toy", {{"gemm", {64, 256, 256}}}},
        {"gemv-rnn",
         {{"fc", {1, 2560, 4096}}, {"proj", {1, 1024, 4096}}, {"out", {1, 4096, 1024}}}},
        {"lstm", {{"gates0", {1, 2048, 4096}}, {"gates1", {1, 2048, 4096}}}},
        {"alexnet",
         {{"conv1", ConvShape{227, 227, 3, 11, 11, 96, 4, 0}.lower()},
          {"conv2", ConvShape{27, 27, 96, 5, 5, 256, 1, 2}.lower()},
          {"conv3", ConvShape{13, 13, 256, 3, 3, 384, 1, 1}.lower()},
          {"conv4", ConvShape{13, 13, 384, 3, 3, 384, 1, 1}.lower()},
          {"conv5", ConvShape{13, 13, 384, 3, 3, 256, 1, 1}.lower()},
          {"fc6", {1, 9216, 4096}},
          {"fc7", {1, 4096, 4096}},
          {"fc8", {1, 4096, 1000}}}},
        {"googlenet",
         {{"conv1", ConvShape{224, 224, 3, 7, 7, 64, 2, 3}.lower()},
          {"conv2", ConvShape{56, 56, 64, 3, 3, 192, 1, 1}.lower()},
          {"i3a_1x1", ConvShape{28, 28, 192, 1, 1, 64, 1, 0}.lower()},
          {"i3a_3x3", ConvShape{28, 28, 96, 3, 3, 128, 1, 1}.lower()},
          {"fc", {1, 1024, 1000}}}},
        {"resnet",
         {{"conv1", ConvShape{224, 224, 3, 7, 7, 64, 2, 3}.lower()},
          {"res2_1x1a", ConvShape{56, 56, 64, 1, 1, 64, 1, 0}.lower()},
          {"res2_3x3", ConvShape{56, 56, 64, 3, 3, 64, 1, 1}.lower()},
          {"res2_1x1b", ConvShape{56, 56, 64, 1, 1, 256, 1, 0}.lower()},
          {"res5_3x3", ConvShape{7, 7, 512, 3, 3, 512, 1, 1}.lower()},
          {"fc", {1, 2048, 1000}}}},
    };
    return s;
}

} // namespace

std::vector<std::string> dense_suite_names()
{
    std::vector<std::string> out;
    for (const auto &[name, layers] : suites())
        out.push_back(name);
    return out;
}

std::vector<LayerConfig> dense_suite(const std::string &full_name, const NpuConfig &npu)
{
    std::string name = full_name;
    std::uint32_t batch = 1;
    const auto dash = full_name.rfind("-b");
    if (dash != std::string::npos && dash + 2 < full_name.size() &&
        full_name.find_first_not_of("0123456789", dash + 2) == std::string::npos) {
        batch = static_cast<std::uint32_t>(std::stoul(full_name.substr(dash + 2)));
        name = full_name.substr(0, dash);
        if (batch == 0)
            throw SimError("batch suffix must be >= 1 in '" + full_name + "'");
    }
    const auto it = suites().find(name);
    if (it == suites().end())
        throw SimError("unknown dense suite '" + full_name + "'");

    std::vector<LayerConfig> layers;
    unsigned slot = 0;
    for (const auto &ns : it->second) {
        layers.push_back(make_gemm_layer(name + "/" + ns.name, ns.shape, batch, npu, slot));
        slot += 3;
    }
    return layers;
}

std::string to_string(IndexDistribution d)
{
    switch (d) {
    case IndexDistribution::Uniform: return "uniform";
    case IndexDistribution::Zipf: return "zipf";
    case IndexDistribution::Sequential: return "sequential";
    }
    return "?";
}

IndexDistribution parse_index_distribution(const std::string &s)
{
    if (s == "uniform")
        return IndexDistribution::Uniform;
    if (s == "zipf")
        return IndexDistribution::Zipf;
    if (s == "sequential")
        return IndexDistribution::Sequential;
    throw SimError("unknown index distribution '" + s + "' (expected uniform, zipf or sequential)");
}

void EmbeddingModel::validate() const
{
    if (tables.empty())
        throw SimError("embedding model has no tables");
    for (const auto &t : tables) {
        if (t.rows == 0 || t.embedding_bytes == 0)
            throw SimError("embedding table rows and embedding_bytes must be >= 1");
        if (t.rows < lookups_per_sample)
            throw SimError("embedding table has fewer rows than lookups per sample");
    }
    if (lookups_per_sample == 0 || batch == 0)
        throw SimError("embedding lookups_per_sample and batch must be >= 1");
    if (distribution == IndexDistribution::Zipf && !(zipf_exponent > 0))
        throw SimError("zipf exponent must be > 0");
}

Placement Placement::round_robin(std::size_t tables, std::uint32_t num_npus)
{
    if (num_npus == 0)
        throw SimError("placement needs at least one NPU");
    Placement p;
    p.num_npus = num_npus;
    for (std::size_t t = 0; t < tables; ++t)
        p.owner.push_back(static_cast<std::uint32_t>(t % num_npus));
    return p;
}

void Placement::validate(std::size_t tables) const
{
    if (num_npus == 0)
        throw SimError("placement needs at least one NPU");
    if (owner.size() != tables)
        throw SimError("placement must assign every table exactly once");
    for (auto o : owner)
        if (o >= num_npus)
            throw SimError("placement assigns a table to a nonexistent NPU");
}

std::vector<std::vector<Gather>> gather_trace(const EmbeddingModel &model, const Placement &placement)
{
    model.validate();
    placement.validate(model.tables.size());
    std::vector<std::vector<Gather>> out(placement.num_npus);
    for (std::uint32_t npu = 0; npu < placement.num_npus; ++npu) {
        Rng rng(split_seed(model.seed, "gather", npu));
        std::vector<ZipfSampler> zipf;
        if (model.distribution == IndexDistribution::Zipf)
            for (const auto &t : model.tables)
                zipf.emplace_back(t.rows, model.zipf_exponent);
        auto &list = out[npu];
        list.reserve(std::size_t{model.batch} * model.tables.size() * model.lookups_per_sample);
        for (std::uint32_t s = 0; s < model.batch; ++s) {
            for (std::uint32_t t = 0; t < model.tables.size(); ++t) {
                const std::uint64_t rows = model.tables[t].rows;
                for (std::uint32_t l = 0; l < model.lookups_per_sample; ++l) {
                    std::uint64_t row = 0;
                    switch (model.distribution) {
                    case IndexDistribution::Uniform: row = rng.below(rows); break;
                    case IndexDistribution::Zipf: row = zipf[t](rng) - 1; break;
                    case IndexDistribution::Sequential:
                        row = (std::uint64_t{npu} * model.batch * model.lookups_per_sample +
                               std::uint64_t{s} * model.lookups_per_sample + l) %
                              rows;
                        break;
                    }
                    list.push_back(Gather{t, row, placement.owner[t]});
                }
            }
        }
    }
    return out;
}

AddressLayout embedding_layout(const EmbeddingModel &model, unsigned first_slot)
{
    AddressLayout layout;
    for (std::uint32_t t = 0; t < model.tables.size(); ++t)
        layout.add_at_slot(SegmentKind::EmbeddingTable, first_slot + t,
                           model.tables[t].rows * model.tables[t].embedding_bytes, t);
    return layout;
}

VirtAddr gather_va(const AddressLayout &layout, const EmbeddingModel &model, const Gather &g)
{
    const Segment *seg = layout.find(SegmentKind::EmbeddingTable, g.table);
    if (!seg)
        throw SimError("gather references a table missing from the layout");
    return seg->base + g.row * model.tables[g.table].embedding_bytes;
}

} // namespace npusim
