#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "reskit/experiments/config.hpp"
#include "reskit/experiments/data.hpp"
#include "reskit/experiments/record.hpp"
#include "reskit/learning.hpp"
#include "reskit/recurrent_kernel.hpp"
#include "reskit/reservoir.hpp"

namespace reskit::experiments {

struct TimingRow {
    std::string algorithm;
    std::size_t N = 0;        ///< 0 for rk
    std::string phase;        ///< forward, train or predict
    double measured = 0.0;    ///< median seconds over the timed runs
    double seconds = 0.0;     ///< for the full workload (extrapolated if only a prefix ran)
    std::size_t work = 0;     ///< steps or windows actually processed
    bool memory_error = false;
};

struct TimingResult {
    std::vector<TimingRow> rows;

    const TimingRow& find(const std::string& alg, std::size_t N, const std::string& phase) const {
        for (const auto& r : rows)
            if (r.algorithm == alg && r.N == N && r.phase == phase) return r;
        throw ConfigError("no timing row for " + alg + " N=" + std::to_string(N) + " " + phase);
    }
};

template <class Fn>
double median_seconds(std::size_t warmup_runs, std::size_t repeats, Fn&& fn) {
    for (std::size_t i = 0; i < warmup_runs; ++i) fn();
    std::vector<double> t;
    for (std::size_t i = 0; i < std::max<std::size_t>(1, repeats); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t.size() / 2), t.end());
    return t[t.size() / 2];
}

/// Wall-clock forward/train/predict times. Reservoir forward passes run
/// `forward_steps` steps and are scaled linearly to the n-step workload, since every
/// step costs the same; the kernel Gram iteration always runs in full.
inline TimingResult run_timing_study(const Config& cfg) {
    const std::size_t n = cfg.count("n"), m = cfg.count("m"), tau = cfg.count("tau"), warmup = cfg.count("warmup");
    const std::size_t reps = cfg.count("repeats"), wr = cfg.count("warmup_runs");
    const std::size_t fsteps = std::min(n, cfg.count("forward_steps"));
    const auto phases = cfg.list("phases");
    auto wants = [&](const std::string& ph) { return std::find(phases.begin(), phases.end(), ph) != phases.end(); };
    TimingResult res;
    if (cfg.counts("N").empty() && cfg.list("algorithms") != std::vector<std::string>{"rk"}) return res;
    const bool need_full = wants("train") || wants("predict");
    Config dcfg = cfg;
    dcfg.set("lyapunov", "1");
    dcfg.set("normalizer_pairs", "1");
    dcfg.set("heldout", std::to_string(m + tau + 1));
    const PreparedData pd = prepare_ks(dcfg, warmup + n + 1);
    const TimeSeries train(pd.series.values.topRows(static_cast<Eigen::Index>(pd.train_frames)), pd.series.dt);
    const TimeSeries test(pd.series.values.bottomRows(static_cast<Eigen::Index>(m + tau)), pd.series.dt);
    const std::size_t d = pd.series.dim();
    const double alpha = cfg.real("alpha"), r = cfg.real("r");
    auto guarded = [&](TimingRow row, auto&& body) {
        try {
            body(row);
        } catch (const std::bad_alloc&) {
            row.memory_error = true;
            row.measured = row.seconds = std::numeric_limits<double>::quiet_NaN();
        }
        res.rows.push_back(row);
    };

    for (const auto& alg : cfg.list("algorithms")) {
        if (alg == "rk") {
            auto [windows, targets] = detail::kernel_training_windows(TimeSeries(train.values.bottomRows(static_cast<Eigen::Index>(n + 1))),
                                                                      tau, cfg.count("rk_subsample"));
            const RKConfig rk{kernel_for(parse_activation(cfg.str("activation"))), cfg.real("sigma_r2"), cfg.real("sigma_i2"), cfg.real("sigma_b2"),
                              cfg.count("workers")};
            const std::size_t nw = windows.count();
            if (wants("forward"))
                guarded({"rk", 0, "forward"}, [&](TimingRow& row) {
                    row.measured = row.seconds = median_seconds(wr, reps, [&] { (void)build_gram_train(windows, rk); });
                    row.work = nw;
                });
            if (need_full) {
                KernelMachine km{rk, &windows, r};
                std::optional<RidgeModel> model;
                if (wants("train"))
                    guarded({"rk", 0, "train"}, [&](TimingRow& row) {
                        const Eigen::MatrixXd G = add_linear_kernel(build_gram_train(windows, rk), windows.last(), windows.last(), r);
                        row.measured = row.seconds = median_seconds(wr, reps, [&] { model = ridge_fit(G, targets, alpha, RidgeMode::dual); });
                        row.work = nw;
                    });
                if (wants("predict"))
                    guarded({"rk", 0, "predict"}, [&](TimingRow& row) {
                        if (!model) model = fit_kernel_readout(windows, targets, km, alpha);
                        const Windows tw = windowize(test, tau, 1);
                        std::vector<std::size_t> idx(std::min<std::size_t>(m, tw.batch.count()));
                        for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
                        const WindowBatch tb = tw.batch.select(idx);
                        row.measured = row.seconds = median_seconds(wr, reps, [&] {
                            (void)(model->weights * add_linear_kernel(build_gram_test(windows, tb, rk), windows.last(), tb.last(), r));
                        });
                        row.work = idx.size();
                    });
            }
            continue;
        }
        if (alg != "rc" && alg != "src") throw ConfigError("unknown algorithm '" + alg + "'");
        for (std::size_t N : cfg.counts("N")) {
            const auto p = detail::reservoir_params(cfg, N, d, alg == "rc" ? Backend::dense : Backend::structured, cfg.counts("seeds").front());
            std::optional<WeightSet> w;
            try {
                w = init_weights(p);
            } catch (const std::bad_alloc&) {
                for (const auto& ph : phases) res.rows.push_back({alg, N, ph, NAN, NAN, 0, true});
                continue;
            }
            if (wants("forward"))
                guarded({alg, N, "forward"}, [&](TimingRow& row) {
                    const TimeSeries prefix(train.values.topRows(static_cast<Eigen::Index>(fsteps)));
                    row.measured = median_seconds(wr, reps, [&] { (void)run(prefix, p, *w, fsteps - 1); });
                    row.seconds = row.measured * static_cast<double>(n) / static_cast<double>(fsteps);
                    row.work = fsteps;
                });
            if (need_full) {
                const ReservoirMachine rm{p, &*w, r, warmup};
                std::optional<RidgeModel> model;
                if (wants("train"))
                    guarded({alg, N, "train"}, [&](TimingRow& row) {
                        const Eigen::MatrixXd states = run(train, p, *w, warmup);
                        const auto cnt = states.cols() - 1;
                        Eigen::MatrixXd feats(states.rows() + static_cast<Eigen::Index>(d), cnt);
                        feats.topRows(states.rows()) = states.leftCols(cnt);
                        feats.bottomRows(static_cast<Eigen::Index>(d)) = r * train.values.middleRows(static_cast<Eigen::Index>(warmup), cnt).transpose();
                        const Eigen::MatrixXd targets = train.values.middleRows(static_cast<Eigen::Index>(warmup) + 1, cnt).transpose();
                        row.measured = row.seconds = median_seconds(wr, reps, [&] { model = ridge_fit_columns(feats, targets, alpha); });
                        model->r = r;
                        row.work = static_cast<std::size_t>(cnt);
                    });
                if (wants("predict"))
                    guarded({alg, N, "predict"}, [&](TimingRow& row) {
                        if (!model) model = fit_reservoir_readout(train, rm, alpha);
                        const TimeSeries tseries(test.values.topRows(static_cast<Eigen::Index>(m)));
                        row.measured = row.seconds = median_seconds(wr, reps, [&] {
                            const Eigen::MatrixXd st = run(tseries, p, *w);
                            Eigen::MatrixXd feats(st.rows() + static_cast<Eigen::Index>(d), st.cols());
                            feats << st, r * tseries.values.transpose();
                            (void)(model->weights * feats).eval();
                        });
                        row.work = m;
                    });
            }
        }
    }
    return res;
}

inline ResultRecord to_record(const TimingResult& r, const Config& cfg) {
    ResultRecord rec;
    rec.experiment = "timing";
    rec.config_hash = cfg.hash();
    const std::string seed = std::to_string(cfg.counts("seeds").front());
    rec.results.columns = {"config_hash", "seed", "algorithm", "N", "phase", "time_measured_s", "time_full_s", "work_units", "status"};
    for (const auto& row : r.rows)
        rec.results.add({rec.config_hash, seed, row.algorithm, fmt(row.N), row.phase, fmt(row.measured), fmt(row.seconds), fmt(row.work),
                         row.memory_error ? "memory error" : "ok"});
    rec.meta["methodology"] = "median of repeats after warmup_runs; reservoir forward scaled from forward_steps to n steps";
    return rec;
}

inline ResultRecord run_timing(const Config& cfg) { return to_record(run_timing_study(cfg), cfg); }

}  // namespace reskit::experiments
