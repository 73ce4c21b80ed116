#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "desx/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"desx: minimum-volume ellipsoid and directional extent experiments"};
    app.set_version_flag("--version", std::string("desx ") + desx::cli::kVersion);
    app.require_subcommand(1);

    std::optional<std::string> seed;
    std::optional<std::string> eps;
    std::optional<std::string> out;
    std::optional<int> threads;
    auto add_flags = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "override the config seed");
        cmd->add_option("--eps", eps, "override the design certificate tolerance");
        cmd->add_option("--out", out, "CSV output path; the manifest goes to <out>.manifest");
        cmd->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    };

    std::string config_path;
    auto* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("config", config_path, "config file")->required();
    add_flags(run);

    std::string list_path;
    auto* sweep = app.add_subcommand("sweep", "run a list of configs of one kind and merge their CSVs");
    sweep->add_option("list", list_path, "file listing member configs, one per line")->required();
    add_flags(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : desx::cli::Status::validation_error;
    }

    const desx::cli::Overrides flags{seed, eps, out, threads};
    if (*run) return desx::cli::run_command(config_path, flags, std::cerr);
    return desx::cli::sweep_command(list_path, flags, std::cerr);
}
