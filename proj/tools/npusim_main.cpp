// npusim: run, sweep, report and validate simulator configurations.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "npusim/harness/config.hpp"
#include "npusim/harness/csv.hpp"
#include "npusim/harness/report.hpp"
#include "npusim/harness/runner.hpp"

using namespace npusim;
using namespace npusim::harness;

namespace {

SimConfig effective_config(const std::string &path, std::optional<std::uint64_t> seed)
{
    SimConfig cfg = path.empty() ? SimConfig{} : load_config(path);
    apply_env_overrides(cfg);
    if (seed)
        cfg.master_seed = *seed;
    cfg.validate();
    return cfg;
}

void write_out(const std::string &path, const std::string &text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw SimError("cannot write '" + path + "'");
    out << text;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Cycle-level NPU + MMU simulator"};
    app.require_subcommand(1);

    std::string config_path, out_path, dump_path;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    std::vector<std::string> sweeps, inputs;

    auto *run = app.add_subcommand("run", "run one configuration and write a CSV row");
    run->add_option("--config", config_path, "YAML config (defaults when omitted)");
    run->add_option("--out", out_path, "CSV output path (stdout when omitted)");
    run->add_option("--seed", seed, "override seeds.master");
    run->add_option("--dump-config", dump_path, "write the effective config as YAML");

    auto *sweep = app.add_subcommand("sweep", "run the cross product of --sweep axes");
    sweep->add_option("--config", config_path, "YAML config (defaults when omitted)");
    sweep->add_option("--out", out_path, "CSV output path (stdout when omitted)");
    sweep->add_option("--seed", seed, "override seeds.master");
    sweep->add_option("--sweep", sweeps, "key=v1,v2,... (repeatable; first is outermost)")->required();
    sweep->add_option("--jobs", jobs, "parallel runs")->check(CLI::PositiveNumber);

    auto *report = app.add_subcommand("report", "summarize result CSVs relative to the oracle");
    report->add_option("inputs", inputs, "CSV files")->required();
    report->add_option("--out", out_path, "report output path (stdout when omitted)");

    auto *validate = app.add_subcommand("validate", "check a config against the schema");
    validate->add_option("--config", config_path, "YAML config")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const SimConfig cfg = effective_config(config_path, seed);
            if (!dump_path.empty())
                write_out(dump_path, dump_config(cfg));
            const RunResult r = run_config(cfg);
            std::cerr << r.summary();
            write_out(out_path, to_csv({r}));
        } else if (*sweep) {
            const SimConfig base = effective_config(config_path, seed);
            std::vector<SweepAxis> axes;
            for (const auto &s : sweeps)
                axes.push_back(SweepAxis::parse(s));
            const auto configs = expand_sweep(base, axes);
            write_out(out_path, to_csv(run_all(configs, jobs)));
        } else if (*report) {
            std::vector<CsvTable> tables;
            for (const auto &p : inputs)
                tables.push_back(read_csv(p));
            write_out(out_path, render_report(build_report(tables)));
        } else if (*validate) {
            effective_config(config_path, std::nullopt);
            std::cout << config_path << ": ok\n";
        }
    } catch (const TranslationFault &e) {
        std::cerr << "fault: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError &e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
