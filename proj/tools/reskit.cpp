// Command-line entry point: reskit <experiment> --config <path> [--set key=value ...] --out <dir>

#include <cstdio>
#include <exception>
#include <iostream>
#include <new>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reskit/errors.hpp"
#include "reskit/experiments/experiments.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

}  // namespace

int main(int argc, char** argv) {
    using namespace reskit;
    CLI::App app{"Reservoir computing and recurrent kernel experiments"};
    std::string experiment, config_path, out_dir;
    std::vector<std::string> overrides;
    app.add_option("experiment", experiment, "convergence | predict | timing | stability | recdirect | simulate-ks")->required();
    app.add_option("--config", config_path, "INI configuration file");
    app.add_option("--set", overrides, "key=value override (repeatable)")->take_all();
    app.add_option("--out", out_dir, "output directory")->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        experiments::Config cfg(experiment);
        if (!config_path.empty()) cfg.load_ini(config_path);
        for (const auto& o : overrides) cfg.apply_override(o);
        const auto rec = experiments::run_experiment(cfg, out_dir);
        std::printf("%s: %zu result rows, %zu curve files, config %s -> %s\n", experiment.c_str(), rec.results.rows.size(),
                    rec.curves.size(), rec.config_hash.c_str(), out_dir.c_str());
        return kExitOk;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return kExitNumeric;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "input error: %s\n", e.what());
        return kExitConfig;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::bad_alloc&) {
        std::fprintf(stderr, "error: out of memory\n");
        return kExitFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
}
