#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "reskit/experiments/config.hpp"
#include "reskit/experiments/data.hpp"
#include "reskit/experiments/record.hpp"
#include "reskit/parallel.hpp"
#include "reskit/recurrent_kernel.hpp"
#include "reskit/reservoir.hpp"

namespace reskit::experiments {

struct StabilityResult {
    std::vector<double> sigma_r2;
    /// rc[i][t]: realization mean of |x1(t) - x2(t)|^2 / |x1(0) - x2(0)|^2, t = 0..steps
    std::vector<std::vector<double>> rc;
    /// rk[i][t]: |K_ones(t) - K_zeros(t)|_F^2 / |K_ones(0) - K_zeros(0)|_F^2, t = 0..tau
    std::vector<std::vector<double>> rk;
    std::size_t realizations = 0;
};

/// Echo-state study: pairs of randomly initialized reservoirs, and recurrent kernels
/// started from all-ones and all-zeros Grams, driven by the same KS input.
inline StabilityResult run_stability_study(const Config& cfg) {
    const std::size_t steps = cfg.count("steps"), R = cfg.count("realizations"), tau = cfg.count("tau");
    const std::size_t N = cfg.counts("N").front(), nw = cfg.count("rk_windows");
    if (steps < 1 || R < 1 || tau < 1 || nw < 1) throw ConfigError("stability: steps, realizations, tau and rk_windows must be positive");
    // Enough data for R distinct input segments and the kernel windows.
    Config data_cfg = cfg;
    data_cfg.set("lyapunov", "1");
    data_cfg.set("normalizer_pairs", "1");
    const std::size_t need = std::max(R * steps, nw * tau) + 1;
    data_cfg.set("heldout", "0");
    const PreparedData pd = prepare_ks(data_cfg, need);
    const auto& data = pd.series.values;
    const std::uint64_t base = cfg.counts("seeds").front();

    StabilityResult res;
    res.sigma_r2 = cfg.reals("sigma_r2_list");
    res.realizations = R;
    for (double s2 : res.sigma_r2) {
        std::vector<std::vector<double>> per(R, std::vector<double>(steps + 1));
        parallel_for(R, cfg.count("workers"), [&](std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k) {
                ReservoirParams p;
                p.N = N;
                p.d = pd.series.dim();
                p.sigma_r = std::sqrt(s2);
                p.sigma_i = std::sqrt(cfg.real("sigma_i2"));
                p.sigma_b = std::sqrt(cfg.real("sigma_b2"));
                p.activation = parse_activation(cfg.str("activation"));
                p.seed = derive_key(base, 0x5ab0 + k);
                const WeightSet w = init_weights(p);
                ReservoirDriver driver(p, w);
                Eigen::MatrixXd x(static_cast<Eigen::Index>(p.state_dim()), 2);
                x.col(0) = random_initial_state(p, derive_key(p.seed, 1));
                x.col(1) = random_initial_state(p, derive_key(p.seed, 2));
                const double d0 = (x.col(0) - x.col(1)).squaredNorm();
                per[k][0] = 1.0;
                for (std::size_t t = 0; t < steps; ++t) {
                    const Eigen::VectorXd in = data.row(static_cast<Eigen::Index>(k * steps + t)).transpose();
                    x = driver.advance(x, in.replicate(1, 2));
                    per[k][t + 1] = (x.col(0) - x.col(1)).squaredNorm() / d0;
                }
            }
        });
        std::vector<double> mean(steps + 1, 0.0);
        for (const auto& c : per)
            for (std::size_t t = 0; t <= steps; ++t) mean[t] += c[t] / static_cast<double>(R);
        res.rc.push_back(std::move(mean));

        const RKConfig rk{kernel_for(parse_activation(cfg.str("activation"))), s2, cfg.real("sigma_i2"), cfg.real("sigma_b2")};
        std::vector<RowMatrix> frames;
        for (std::size_t t = 0; t < tau; ++t) {
            RowMatrix f(static_cast<Eigen::Index>(nw), data.cols());
            for (std::size_t k = 0; k < nw; ++k) f.row(static_cast<Eigen::Index>(k)) = data.row(static_cast<Eigen::Index>(k * tau + t));
            frames.push_back(std::move(f));
        }
        RKState a = RKState::ones(nw, nw, rk), b = RKState::zeros(nw, nw, rk);
        const double k0 = (a.gram - b.gram).squaredNorm();
        std::vector<double> curve{1.0};
        for (std::size_t t = 0; t < tau; ++t) {
            rk_advance(a, frames[t], frames[t], true);
            rk_advance(b, frames[t], frames[t], true);
            curve.push_back((a.gram - b.gram).squaredNorm() / k0);
        }
        res.rk.push_back(std::move(curve));
    }
    return res;
}

inline ResultRecord to_record(const StabilityResult& r, const Config& cfg) {
    ResultRecord rec;
    rec.experiment = "stability";
    rec.config_hash = cfg.hash();
    const std::string seed = std::to_string(cfg.counts("seeds").front());
    rec.results.columns = {"config_hash", "seed", "model", "sigma_r2", "t", "normalized_distance"};
    Table curve;
    curve.columns = rec.results.columns;
    for (std::size_t i = 0; i < r.sigma_r2.size(); ++i) {
        for (std::size_t t = 0; t < r.rc[i].size(); ++t) curve.add({rec.config_hash, seed, "rc", fmt(r.sigma_r2[i]), fmt(t), fmt(r.rc[i][t])});
        for (std::size_t t = 0; t < r.rk[i].size(); ++t) curve.add({rec.config_hash, seed, "rk", fmt(r.sigma_r2[i]), fmt(t), fmt(r.rk[i][t])});
        rec.results.add({rec.config_hash, seed, "rc", fmt(r.sigma_r2[i]), fmt(r.rc[i].size() - 1), fmt(r.rc[i].back())});
        rec.results.add({rec.config_hash, seed, "rk", fmt(r.sigma_r2[i]), fmt(r.rk[i].size() - 1), fmt(r.rk[i].back())});
    }
    rec.curves["stability"] = std::move(curve);
    rec.meta["realizations"] = r.realizations;
    return rec;
}

inline ResultRecord run_stability(const Config& cfg) { return to_record(run_stability_study(cfg), cfg); }

}  // namespace reskit::experiments
