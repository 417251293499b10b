// Command-line runner: run <config>, validate <config>, list-scenarios.
// Exit codes: 0 ok, 2 configuration error, 3 estimator/runtime error.

#include <iostream>

#include "CLI11.hpp"
#include "wwsc/experiment.hpp"

namespace ex = wwsc::experiment;

int main(int argc, char** argv) {
    CLI::App app{"Semiclassical multi-time correlations in phase space"};
    app.require_subcommand(1);
    std::string path;
    auto* run = app.add_subcommand("run", "run the experiment described by a JSON config");
    run->add_option("config", path, "config file")->required();
    auto* validate = app.add_subcommand("validate", "check a config without running it");
    validate->add_option("config", path, "config file")->required();
    auto* list = app.add_subcommand("list-scenarios", "print the known scenarios");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (list->parsed()) {
        for (const auto& s : ex::scenarios()) std::cout << s.name << "\t" << s.summary << "\n";
        return 0;
    }

    ex::ExperimentConfig cfg;
    try {
        cfg = ex::load_config(path);
    } catch (const wwsc::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    if (validate->parsed()) {
        std::cout << "ok: " << cfg.scenario << " (" << cfg.name << ")\n";
        return 0;
    }
    (void)run;
    try {
        const auto art = ex::run_experiment(cfg);
        for (const auto& p : ex::write_artifacts(art, ex::output_dir(cfg), cfg.name)) std::cout << p.string() << "\n";
    } catch (const wwsc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "estimator error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
