#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "reskit/errors.hpp"
#include "reskit/experiments/config.hpp"
#include "reskit/experiments/data.hpp"
#include "reskit/experiments/record.hpp"
#include "reskit/learning.hpp"
#include "reskit/recurrent_kernel.hpp"
#include "reskit/reservoir.hpp"

namespace reskit::experiments {

/// Held-out forecast problems: warm-up segments and the frames that follow them.
struct TestSet {
    std::vector<TimeSeries> warm;
    std::vector<TimeSeries> truth;
    std::vector<std::size_t> starts;
};

/// `count` random starts in the held-out part of the data, drawn from `seed`.
inline TestSet make_test_set(const PreparedData& pd, std::size_t count, std::size_t warmup, std::size_t horizon,
                             std::uint64_t seed) {
    const std::size_t first = pd.train_frames, T = pd.series.length();
    if (first + warmup + horizon > T) throw ConfigError("held-out data shorter than warm-up + horizon");
    const std::size_t span = T - warmup - horizon - first + 1;
    const CounterRng rng(derive_key(seed, 0x7e57));
    TestSet ts;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t s = first + static_cast<std::size_t>(rng.uniform(k) * static_cast<double>(span)) % span;
        ts.starts.push_back(s);
        ts.warm.emplace_back(pd.series.values.middleRows(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(warmup)), pd.series.dt);
        ts.truth.emplace_back(pd.series.values.middleRows(static_cast<Eigen::Index>(s + warmup), static_cast<Eigen::Index>(horizon)), pd.series.dt);
    }
    return ts;
}

/// Mean NMSE curve over the test set; a start whose forecast diverges contributes
/// +inf from the failing step on.
template <class Machine>
std::pair<std::vector<double>, std::size_t> mean_nmse(const RidgeModel& m, const Machine& mach, const TestSet& ts,
                                                      std::size_t horizon, double normalizer) {
    std::vector<double> mean(horizon, 0.0);
    const std::vector<double> norm(horizon, normalizer);
    std::size_t diverged = 0;
    auto accumulate = [&](const TimeSeries& pred, const TimeSeries& truth) {
        const auto c = nmse_curve(pred, truth, norm);
        for (std::size_t h = 0; h < horizon; ++h) mean[h] += c[h];
    };
    try {
        const auto preds = forecast_closed_loop_batch(m, mach, ts.warm, horizon);
        for (std::size_t k = 0; k < preds.size(); ++k) accumulate(preds[k], ts.truth[k]);
    } catch (const DivergenceError&) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (std::size_t k = 0; k < ts.warm.size(); ++k) {
            try {
                accumulate(forecast_closed_loop(m, mach, ts.warm[k], horizon), ts.truth[k]);
            } catch (const DivergenceError& e) {
                ++diverged;
                for (std::size_t h = e.step(); h < horizon; ++h) mean[h] = std::numeric_limits<double>::infinity();
            }
        }
    }
    for (auto& v : mean) v /= static_cast<double>(ts.warm.size());
    return {mean, diverged};
}

struct AlgorithmCurves {
    std::string algorithm;  ///< rc, src or rk
    std::size_t N = 0;      ///< 0 for rk
    std::vector<std::vector<double>> per_seed;  ///< mean NMSE curve per seed
    std::vector<std::size_t> diverged;
    std::vector<double> alpha_used;
    double train_seconds = 0.0;

    /// Seed mean and standard deviation at horizon step h (0-based).
    std::pair<double, double> stats(std::size_t h) const {
        double s = 0, s2 = 0;
        for (const auto& c : per_seed) s += c[h];
        const double n = static_cast<double>(per_seed.size());
        const double mu = s / n;
        for (const auto& c : per_seed) s2 += (c[h] - mu) * (c[h] - mu);
        return {mu, per_seed.size() > 1 ? std::sqrt(s2 / (n - 1)) : 0.0};
    }
};

struct PredictionResult {
    double lyapunov = 0.0;
    std::size_t lyapunov_steps = 1;
    double normalizer = 1.0;
    double scale = 1.0;
    std::size_t horizon = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<AlgorithmCurves> curves;

    const AlgorithmCurves& find(const std::string& alg, std::size_t N = 0) const {
        for (const auto& c : curves)
            if (c.algorithm == alg && (alg == "rk" || c.N == N)) return c;
        throw ConfigError("no curves for " + alg + " N=" + std::to_string(N));
    }
};

namespace detail {

inline ReservoirParams reservoir_params(const Config& cfg, std::size_t N, std::size_t d, Backend be, std::uint64_t seed) {
    ReservoirParams p;
    p.N = N;
    p.d = d;
    p.sigma_r = std::sqrt(cfg.real("sigma_r2"));
    p.sigma_i = std::sqrt(cfg.real("sigma_i2"));
    p.sigma_b = std::sqrt(cfg.real("sigma_b2"));
    p.activation = parse_activation(cfg.str("activation"));
    p.backend = be;
    p.seed = seed;
    p.validate();
    return p;
}

/// Training windows for the kernel model: about `count` windows spread over the
/// training frames, each with its successor frame as target.
inline std::pair<WindowBatch, RowMatrix> kernel_training_windows(const TimeSeries& train, std::size_t tau, std::size_t count) {
    if (train.length() < tau + 1) throw ConfigError("training data shorter than one window");
    const std::size_t available = train.length() - tau;
    const std::size_t stride = std::max<std::size_t>(1, available / std::max<std::size_t>(1, count));
    Windows w = windowize(train, tau, stride);
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < std::min<std::size_t>(count, static_cast<std::size_t>(w.targets.rows())); ++k) idx.push_back(k);
    RowMatrix targets(static_cast<Eigen::Index>(idx.size()), w.targets.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) targets.row(static_cast<Eigen::Index>(k)) = w.targets.row(static_cast<Eigen::Index>(idx[k]));
    return {w.batch.select(idx), std::move(targets)};
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Trains RC/SRC (primal) and RK (dual) next-frame models on KS data and measures
/// closed-loop NMSE curves from random held-out starts, per seed.
inline PredictionResult run_prediction_study(const Config& cfg) {
    const std::size_t warmup = cfg.count("warmup"), n = cfg.count("n"), horizon = cfg.count("horizon");
    const std::size_t tau = cfg.count("tau");
    const double alpha = cfg.real("alpha"), r = cfg.real("r");
    const auto algorithms = cfg.list("algorithms");
    std::vector<std::uint64_t> seeds;
    for (auto s : cfg.counts("seeds")) seeds.push_back(s);
    if (seeds.empty() || algorithms.empty()) throw ConfigError("predict: seeds and algorithms must be non-empty");
    if (n < 1 || warmup < tau) throw ConfigError("predict: need n >= 1 and warmup >= tau");

    const PreparedData pd = prepare_ks(cfg, warmup + n + 1);
    const TimeSeries train(pd.series.values.topRows(static_cast<Eigen::Index>(pd.train_frames)), pd.series.dt);
    const std::size_t d = pd.series.dim();

    PredictionResult res;
    res.lyapunov = pd.lyapunov;
    res.lyapunov_steps = pd.lyapunov_steps;
    res.normalizer = pd.normalizer;
    res.scale = pd.scale;
    res.horizon = horizon;
    res.seeds = seeds;
    std::vector<TestSet> tests;
    for (auto s : seeds) tests.push_back(make_test_set(pd, cfg.count("test_starts"), warmup, horizon, s));

    for (const auto& alg : algorithms) {
        if (alg == "rk") {
            AlgorithmCurves ac;
            ac.algorithm = "rk";
            const auto t0 = std::chrono::steady_clock::now();
            auto [windows, targets] = detail::kernel_training_windows(
                TimeSeries(train.values.bottomRows(static_cast<Eigen::Index>(n + 1)), train.dt), tau, cfg.count("rk_subsample"));
            KernelMachine km{RKConfig{kernel_for(parse_activation(cfg.str("activation"))), cfg.real("sigma_r2"),
                                      cfg.real("sigma_i2"), cfg.real("sigma_b2"), cfg.count("workers")},
                             &windows, r};
            const RidgeModel m = fit_kernel_readout(windows, targets, km, alpha);
            ac.train_seconds = detail::seconds_since(t0);
            for (std::size_t si = 0; si < seeds.size(); ++si) {
                auto [curve, div] = mean_nmse(m, km, tests[si], horizon, pd.normalizer);
                ac.per_seed.push_back(std::move(curve));
                ac.diverged.push_back(div);
                ac.alpha_used.push_back(m.alpha_used);
            }
            res.curves.push_back(std::move(ac));
        } else if (alg == "rc" || alg == "src") {
            for (std::size_t N : cfg.counts("N")) {
                AlgorithmCurves ac;
                ac.algorithm = alg;
                ac.N = N;
                for (std::size_t si = 0; si < seeds.size(); ++si) {
                    const auto p = detail::reservoir_params(cfg, N, d, alg == "rc" ? Backend::dense : Backend::structured, seeds[si]);
                    const auto t0 = std::chrono::steady_clock::now();
                    const WeightSet w = init_weights(p);
                    const ReservoirMachine rm{p, &w, r, warmup};
                    const RidgeModel m = fit_reservoir_readout(train, rm, alpha);
                    ac.train_seconds += detail::seconds_since(t0);
                    auto [curve, div] = mean_nmse(m, rm, tests[si], horizon, pd.normalizer);
                    ac.per_seed.push_back(std::move(curve));
                    ac.diverged.push_back(div);
                    ac.alpha_used.push_back(m.alpha_used);
                }
                res.curves.push_back(std::move(ac));
            }
        } else {
            throw ConfigError("unknown algorithm '" + alg + "'");
        }
    }
    return res;
}

inline ResultRecord to_record(const PredictionResult& r, const Config& cfg) {
    ResultRecord rec;
    rec.experiment = "predict";
    rec.config_hash = cfg.hash();
    rec.results.columns = {"config_hash", "seed", "algorithm", "N", "nmse_0.5lt", "nmse_1lt", "nmse_2lt", "nmse_3lt", "diverged_starts", "alpha_used"};
    auto at = [&](const std::vector<double>& c, double lt) {
        const auto h = static_cast<std::size_t>(std::lround(lt * static_cast<double>(r.lyapunov_steps)));
        return h >= 1 && h <= c.size() ? fmt(c[h - 1]) : std::string("nan");
    };
    for (const auto& ac : r.curves) {
        Table t;
        t.columns = {"config_hash", "seed", "step", "lyapunov_time", "nmse"};
        for (std::size_t si = 0; si < ac.per_seed.size(); ++si) {
            const auto& c = ac.per_seed[si];
            const auto seed = std::to_string(r.seeds[si]);
            rec.results.add({rec.config_hash, seed, ac.algorithm, fmt(ac.N), at(c, 0.5), at(c, 1), at(c, 2), at(c, 3),
                             fmt(ac.diverged[si]), fmt(ac.alpha_used[si])});
            for (std::size_t h = 0; h < c.size(); ++h)
                t.add({rec.config_hash, seed, fmt(h + 1), fmt(static_cast<double>(h + 1) / static_cast<double>(r.lyapunov_steps)), fmt(c[h])});
        }
        rec.curves["nmse_" + ac.algorithm + (ac.algorithm == "rk" ? "" : "_N" + std::to_string(ac.N))] = std::move(t);
    }
    rec.meta["lyapunov"] = r.lyapunov;
    rec.meta["lyapunov_steps"] = r.lyapunov_steps;
    rec.meta["normalizer"] = r.normalizer;
    rec.meta["input_scale"] = r.scale;
    json timing = json::object();
    for (const auto& ac : r.curves) timing[ac.algorithm + "_" + std::to_string(ac.N)] = {{"train_seconds", ac.train_seconds}};
    rec.meta["timing"] = timing;
    return rec;
}

inline ResultRecord run_prediction(const Config& cfg) { return to_record(run_prediction_study(cfg), cfg); }

// ---------------------------------------------------------------------------------
// Closed-loop against direct multi-step prediction

struct RecDirectResult {
    std::size_t lyapunov_steps = 1;
    double lyapunov = 0.0;
    std::size_t horizon = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> closed_loop;  ///< per seed
    std::vector<std::vector<double>> direct;       ///< per seed
    std::vector<double> direct_tail_variance;      ///< per seed, last 20% of the horizon
    std::vector<double> truth_tail_variance;

    double mean_at(const std::vector<std::vector<double>>& c, std::size_t h) const {
        double s = 0;
        for (const auto& v : c) s += v[h];
        return s / static_cast<double>(c.size());
    }
};

inline double tail_variance(const std::vector<TimeSeries>& xs, std::size_t from) {
    double s = 0, s2 = 0, cnt = 0;
    for (const auto& x : xs)
        for (auto t = static_cast<Eigen::Index>(from); t < x.values.rows(); ++t)
            for (Eigen::Index j = 0; j < x.values.cols(); ++j) {
                s += x.values(t, j);
                s2 += x.values(t, j) * x.values(t, j);
                cnt += 1;
            }
    const double mu = s / cnt;
    return s2 / cnt - mu * mu;
}

inline RecDirectResult run_recdirect_study(const Config& cfg) {
    const std::size_t warmup = cfg.count("warmup"), n = cfg.count("n"), H = cfg.count("direct_horizon");
    const double alpha = cfg.real("alpha"), r = cfg.real("r");
    const auto Ns = cfg.counts("N");
    if (Ns.empty() || H < 1) throw ConfigError("recdirect: need N and direct_horizon >= 1");
    const PreparedData pd = prepare_ks(cfg, warmup + n + H);
    const TimeSeries train(pd.series.values.topRows(static_cast<Eigen::Index>(pd.train_frames)), pd.series.dt);
    RecDirectResult res;
    res.lyapunov = pd.lyapunov;
    res.lyapunov_steps = pd.lyapunov_steps;
    res.horizon = H;
    const std::vector<double> norm(H, pd.normalizer);
    for (auto s : cfg.counts("seeds")) {
        res.seeds.push_back(s);
        const TestSet ts = make_test_set(pd, cfg.count("test_starts"), warmup, H, s);
        const auto p = detail::reservoir_params(cfg, Ns.front(), pd.series.dim(), Backend::dense, s);
        const WeightSet w = init_weights(p);
        // The direct model is trained on the same frames, its last H targets included.
        const ReservoirMachine rm{p, &w, r, warmup};
        const RidgeModel next = fit_reservoir_readout(TimeSeries(train.values.topRows(static_cast<Eigen::Index>(warmup + n + 1)), train.dt), rm, alpha);
        res.closed_loop.push_back(mean_nmse(next, rm, ts, H, pd.normalizer).first);
        const RidgeModel multi = fit_direct_readout(train, rm, alpha, H);
        std::vector<double> mean(H, 0.0);
        std::vector<TimeSeries> preds;
        for (std::size_t k = 0; k < ts.warm.size(); ++k) {
            const Eigen::MatrixXd states = run(ts.warm[k], p, w);
            Eigen::VectorXd feat(states.rows() + static_cast<Eigen::Index>(pd.series.dim()));
            feat << states.col(states.cols() - 1), r * ts.warm[k].frame(ts.warm[k].length() - 1);
            preds.push_back(forecast_direct(multi, feat, pd.series.dim(), H));
            const auto c = nmse_curve(preds.back(), ts.truth[k], norm);
            for (std::size_t h = 0; h < H; ++h) mean[h] += c[h] / static_cast<double>(ts.warm.size());
        }
        res.direct.push_back(std::move(mean));
        const std::size_t from = H - std::max<std::size_t>(1, H / 5);
        res.direct_tail_variance.push_back(tail_variance(preds, from));
        res.truth_tail_variance.push_back(tail_variance(ts.truth, from));
    }
    return res;
}

inline ResultRecord to_record(const RecDirectResult& r, const Config& cfg) {
    ResultRecord rec;
    rec.experiment = "recdirect";
    rec.config_hash = cfg.hash();
    rec.results.columns = {"config_hash", "seed", "strategy", "nmse_1lt", "nmse_2lt", "tail_output_variance", "tail_truth_variance"};
    auto at = [&](const std::vector<double>& c, double lt) {
        const auto h = static_cast<std::size_t>(std::lround(lt * static_cast<double>(r.lyapunov_steps)));
        return h >= 1 && h <= c.size() ? fmt(c[h - 1]) : std::string("nan");
    };
    Table t;
    t.columns = {"config_hash", "seed", "step", "lyapunov_time", "nmse_closed_loop", "nmse_direct"};
    for (std::size_t si = 0; si < r.seeds.size(); ++si) {
        const auto seed = std::to_string(r.seeds[si]);
        rec.results.add({rec.config_hash, seed, "closed_loop", at(r.closed_loop[si], 1), at(r.closed_loop[si], 2), "nan",
                         fmt(r.truth_tail_variance[si])});
        rec.results.add({rec.config_hash, seed, "direct", at(r.direct[si], 1), at(r.direct[si], 2), fmt(r.direct_tail_variance[si]),
                         fmt(r.truth_tail_variance[si])});
        for (std::size_t h = 0; h < r.horizon; ++h)
            t.add({rec.config_hash, seed, fmt(h + 1), fmt(static_cast<double>(h + 1) / static_cast<double>(r.lyapunov_steps)),
                   fmt(r.closed_loop[si][h]), fmt(r.direct[si][h])});
    }
    rec.curves["nmse_recursive_vs_direct"] = std::move(t);
    rec.meta["lyapunov"] = r.lyapunov;
    rec.meta["lyapunov_steps"] = r.lyapunov_steps;
    return rec;
}

inline ResultRecord run_recursive_vs_direct(const Config& cfg) { return to_record(run_recdirect_study(cfg), cfg); }

}  // namespace reskit::experiments
