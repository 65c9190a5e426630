#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "abc/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ABC SMC with adaptive perturbation kernels"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> output_dir;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "JSON experiment config")->required();
        sub->add_option("--seed", seed, "override the base seed");
        sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--output-dir", output_dir, "directory for CSV output");
    };
    auto* run = app.add_subcommand("run", "run one ABC SMC experiment");
    add_common(run);
    auto* bench = app.add_subcommand("bench", "run every kernel for every repeat and summarize");
    add_common(bench);
    auto* validate = app.add_subcommand("validate", "check a config without running it");
    validate->add_option("config", config_path, "JSON experiment config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const abc::CliOverrides overrides{seed, workers, output_dir};
    if (run->parsed()) return abc::cmd_run(config_path, overrides, std::cout, std::cerr);
    if (bench->parsed()) return abc::cmd_bench(config_path, overrides, std::cout, std::cerr);
    return abc::cmd_validate(config_path, std::cout, std::cerr);
}
