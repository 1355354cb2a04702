#pragma once

#include <filesystem>
#include <string>

#include "reskit/experiments/config.hpp"
#include "reskit/experiments/convergence.hpp"
#include "reskit/experiments/prediction.hpp"
#include "reskit/experiments/record.hpp"
#include "reskit/experiments/simulate.hpp"
#include "reskit/experiments/stability.hpp"
#include "reskit/experiments/timing.hpp"

namespace reskit::experiments {

/// Runs the configured experiment and writes its outputs into `out`.
inline ResultRecord run_experiment(const Config& cfg, const std::filesystem::path& out) {
    const auto& e = cfg.experiment();
    ResultRecord rec;
    if (e == "convergence") rec = run_convergence(cfg);
    else if (e == "predict") rec = run_prediction(cfg);
    else if (e == "timing") rec = run_timing(cfg);
    else if (e == "stability") rec = run_stability(cfg);
    else if (e == "recdirect") rec = run_recursive_vs_direct(cfg);
    else if (e == "simulate-ks") rec = run_simulate_ks(cfg, out);
    else throw ConfigError("unknown experiment '" + e + "'");
    rec.write(out, cfg);
    return rec;
}

}  // namespace reskit::experiments
