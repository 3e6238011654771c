// ergolab <kind> --config <path> [--seed S] [--out DIR] [--check]
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ergolab/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ergolab: finite-system ergodic experiments"};
    std::string kind, config_path, out_dir = "out";
    std::optional<std::uint64_t> seed;
    bool check_only = false;
    std::string kinds;
    for (const auto& k : ergolab::experiment_kinds()) kinds += (kinds.empty() ? "" : ", ") + k;
    app.add_option("kind", kind, "experiment kind: " + kinds)->required();
    app.add_option("--config", config_path, "JSON config file")->required();
    app.add_option("--seed", seed, "seed (overrides the config)");
    app.add_option("--out", out_dir, "output directory");
    app.add_flag("--check", check_only, "validate the config and exit");
    CLI11_PARSE(app, argc, argv);

    nlohmann::json cfg;
    {
        std::ifstream is(config_path);
        if (!is) {
            std::cerr << "error: cannot open " << config_path << "\n";
            return 1;
        }
        try {
            cfg = nlohmann::json::parse(is);
        } catch (const nlohmann::json::parse_error& e) {
            std::cerr << "error: " << config_path << ": " << e.what() << "\n";
            return 1;
        }
    }
    const auto diags = ergolab::validate_config(kind, cfg, seed);
    if (!diags.empty()) {
        std::cerr << "invalid config " << config_path << ":\n";
        for (const auto& d : diags) std::cerr << "  " << d.path << ": " << d.message << "\n";
        return 1;
    }
    if (check_only) {
        std::cout << "config ok\n";
        return 0;
    }
    try {
        const auto res = ergolab::run_experiment(kind, cfg, out_dir, seed);
        for (const auto& f : res.files) std::cout << out_dir << "/" << f << "\n";
        if (res.report.at("status") != "ok") {
            std::cerr << "error: " << res.report.at("error").get<std::string>() << "\n";
            return 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
