#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "reskit/errors.hpp"
#include "reskit/experiments/config.hpp"
#include "reskit/io.hpp"
#include "reskit/ks.hpp"

namespace reskit::experiments {

inline KSConfig ks_config(const Config& cfg) {
    KSConfig k;
    k.L = cfg.real("ks_L");
    k.grid = cfg.count("ks_grid");
    k.dt = cfg.real("ks_dt");
    k.subsample = cfg.count("ks_subsample");
    k.transient = cfg.count("ks_transient");
    k.seed = cfg.count("ks_seed");
    try {
        k.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return k;
}

/// KS trajectory ready for learning: scaled series, Lyapunov calibration and the
/// NMSE normalizer (MSE between independent runs, in the same scaling).
struct PreparedData {
    TimeSeries series;
    KSConfig ks;
    double scale = 1.0;
    double lyapunov = 0.0;
    double normalizer = 1.0;
    std::size_t lyapunov_steps = 1;  ///< frames per Lyapunov time
    std::size_t train_frames = 0;    ///< [0, train_frames) is training data
};

/// Mean over pairs and time of |a(t) - b(t)|^2 / d between independent trajectories.
inline double independent_run_mse(const KSConfig& base, std::size_t pairs, std::size_t frames) {
    double acc = 0;
    for (std::size_t k = 0; k < pairs; ++k) {
        KSConfig a = base, b = base;
        a.seed = base.seed + 1000 + 2 * k;
        b.seed = base.seed + 1001 + 2 * k;
        const auto A = simulate_ks(a, frames), B = simulate_ks(b, frames);
        acc += (A.series.values - B.series.values).squaredNorm() /
               static_cast<double>(frames * A.series.dim());
    }
    return acc / static_cast<double>(pairs);
}

/// Loads `dataset` or simulates `train_frames + heldout` frames, scales the series,
/// calibrates the Lyapunov time and computes the normalizer.
inline PreparedData prepare_ks(const Config& cfg, std::size_t train_frames) {
    PreparedData pd;
    const std::size_t total = train_frames + cfg.count("heldout");
    double lyap = std::numeric_limits<double>::quiet_NaN();
    if (const auto& path = cfg.str("dataset"); !path.empty()) {
        Dataset ds = load_dataset(path);
        if (ds.length() < total)
            throw ConfigError("dataset '" + path + "' has " + std::to_string(ds.length()) + " frames, " +
                              std::to_string(total) + " needed");
        pd.ks = ds.config;
        pd.series = std::move(ds.series);
        lyap = ds.lyapunov;
    } else {
        pd.ks = ks_config(cfg);
        pd.series = simulate_ks(pd.ks, total).series;
    }
    pd.train_frames = train_frames;
    if (const auto& mode = cfg.str("normalize"); mode == "unit_power" || mode == "max_abs") {
        TimeSeries train(pd.series.values.topRows(static_cast<Eigen::Index>(train_frames)), pd.series.dt);
        pd.scale = mode == "unit_power" ? normalize_unit_power(train) : normalize_max_abs(train);
        pd.series.values *= pd.scale;
    } else if (mode != "none") {
        throw ConfigError("normalize must be max_abs, unit_power or none");
    }
    if (const auto& l = cfg.str("lyapunov"); l != "auto") {
        lyap = cfg.real("lyapunov");
    } else if (!std::isfinite(lyap)) {
        LyapunovOptions opt;
        opt.probes = cfg.count("lyap_probes");
        opt.horizon = cfg.count("lyap_horizon");
        lyap = estimate_lyapunov(pd.ks, opt).lambda;
    }
    if (!(lyap > 0.0)) throw NumericError("KS data is not chaotic (lambda = " + std::to_string(lyap) + ")");
    pd.lyapunov = lyap;
    const double dt_frame = pd.ks.dt * static_cast<double>(pd.ks.subsample);
    pd.lyapunov_steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1.0 / (lyap * dt_frame))));
    pd.normalizer = independent_run_mse(pd.ks, cfg.count("normalizer_pairs"), 4000) * pd.scale * pd.scale;
    return pd;
}

}  // namespace reskit::experiments
