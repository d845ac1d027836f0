#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "mfc/experiments.hpp"
#include "mfc/version.hpp"

namespace {

std::string read_file(const std::string& path, bool& ok) {
    std::ifstream in(path);
    if (!in) {
        ok = false;
        return {};
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    ok = true;
    return buf.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field delay control experiments"};
    app.set_version_flag("--version", mfc::library_version);
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false, out_set = false;

    auto* run = app.add_subcommand("run", "run an experiment from a config");
    run->add_option("--config", config_path, "config file (JSON)")->required();
    auto* seed_opt = run->add_option("--seed", seed, "override the seed");
    auto* out_opt = run->add_option("--out", out_dir, "override the output dir");

    auto* validate =
        app.add_subcommand("validate", "validate a config and report all errors");
    validate->add_option("--config", config_path, "config file (JSON)")
        ->required();

    auto* list = app.add_subcommand("list-experiments", "list experiment names");

    CLI11_PARSE(app, argc, argv);
    seed_set = seed_opt->count() > 0;
    out_set = out_opt->count() > 0;

    if (list->parsed()) {
        for (const auto& name : mfc::experiment_names()) {
            std::cout << name << "\n";
        }
        return 0;
    }

    bool ok = false;
    const std::string raw = read_file(config_path, ok);
    if (!ok) {
        std::cerr << "cannot read config: " << config_path << "\n";
        return 2;
    }
    mfc::ValidationResult vr = mfc::validate_config(raw);

    if (validate->parsed()) {
        if (vr.ok()) {
            std::cout << "config ok\n" << vr.config.to_json().dump(2) << "\n";
            return 0;
        }
        for (const auto& e : vr.errors) std::cerr << "error: " << e << "\n";
        return 2;
    }

    if (!vr.ok()) {
        for (const auto& e : vr.errors) std::cerr << "error: " << e << "\n";
        return 2;
    }
    if (seed_set) vr.config.seed = seed;
    if (out_set) vr.config.output_dir = out_dir;
    return mfc::run_experiment(vr.config);
}
