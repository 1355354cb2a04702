#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "reskit/errors.hpp"
#include "reskit/experiments/config.hpp"
#include "reskit/experiments/record.hpp"
#include "reskit/parallel.hpp"
#include "reskit/recurrent_kernel.hpp"
#include "reskit/reservoir.hpp"
#include "reskit/rng.hpp"

namespace reskit::experiments {

/// Gaussian input series for the convergence studies: `count` series of `length`
/// frames with i.i.d. N(0, 1/dim) entries, so that |i| is about 1. Frame-major.
inline std::vector<RowMatrix> gaussian_inputs(std::size_t count, std::size_t length, std::size_t dim,
                                              std::uint64_t seed) {
    std::vector<RowMatrix> frames(length, RowMatrix(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim)));
    const double sd = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t t = 0; t < length; ++t)
        CounterRng(derive_key(seed, 0x1000 + t)).fill_normal(frames[t], sd);
    return frames;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DimensionError("slope: need at least two points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) throw NumericError("slope: non-positive value on a log axis");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

struct ConvergenceKey {
    Activation activation;
    double sigma_r2;
    Backend backend;
    bool redraw;

    auto tie() const { return std::tie(activation, sigma_r2, backend, redraw); }
    bool operator<(const ConvergenceKey& o) const { return tie() < o.tie(); }
    bool operator==(const ConvergenceKey& o) const { return tie() == o.tie(); }
};

struct ConvergenceResult {
    std::vector<std::size_t> Ns;
    std::vector<std::size_t> record_t;
    std::vector<std::uint64_t> seeds;
    /// mse[key][seed index][N index][record index]
    std::map<ConvergenceKey, std::vector<std::vector<std::vector<double>>>> mse;

    /// Seed-averaged MSE at (N index, record index).
    double mean_mse(const ConvergenceKey& k, std::size_t ni, std::size_t ti) const {
        const auto& per_seed = mse.at(k);
        double s = 0;
        for (const auto& v : per_seed) s += v[ni][ti];
        return s / static_cast<double>(per_seed.size());
    }

    double slope(const ConvergenceKey& k, std::size_t ti) const {
        std::vector<double> x, y;
        for (std::size_t i = 0; i < Ns.size(); ++i) {
            x.push_back(static_cast<double>(Ns[i]));
            y.push_back(mean_mse(k, i, ti));
        }
        return loglog_slope(x, y);
    }

    std::size_t record_index(std::size_t t) const {
        for (std::size_t i = 0; i < record_t.size(); ++i)
            if (record_t[i] == t) return i;
        throw ConfigError("time " + std::to_string(t) + " was not recorded");
    }
};

namespace detail {

inline std::vector<bool> redraw_modes(const Config& cfg) {
    const auto& m = cfg.str("redraw");
    if (m == "off") return {false};
    if (m == "on") return {true};
    if (m == "both") return {false, true};
    throw ConfigError("redraw must be off, on or both");
}

inline std::vector<Backend> reservoir_backends(const Config& cfg) {
    std::vector<Backend> out;
    for (const auto& a : cfg.list("algorithms")) {
        if (a == "rc") out.push_back(Backend::dense);
        else if (a == "src") out.push_back(Backend::structured);
        else if (a != "rk") throw ConfigError("unknown algorithm '" + a + "'");
    }
    return out;
}

/// Recurrent-kernel Grams at the recorded times for one set of input frames.
inline std::vector<Eigen::MatrixXd> kernel_targets(const std::vector<RowMatrix>& frames, const RKConfig& rk,
                                                   const std::vector<std::size_t>& record_t) {
    std::vector<Eigen::MatrixXd> out;
    RKState s = RKState::zeros(static_cast<std::size_t>(frames[0].rows()), static_cast<std::size_t>(frames[0].rows()), rk);
    std::size_t next = 0;
    for (std::size_t t = 0; t < frames.size() && next < record_t.size(); ++t) {
        rk_advance(s, frames[t], frames[t], family(rk.kind) == KernelFamily::rotation_invariant);
        if (t + 1 == record_t[next]) {
            out.push_back(s.gram);
            ++next;
        }
    }
    return out;
}

}  // namespace detail

/// MSE between reservoir Gram matrices <x_k^(t), x_l^(t)> and the recurrent kernel
/// k_t over all pairs of shared-weight reservoirs, per activation, sigma_r^2, backend,
/// redraw mode, N and recorded time.
inline ConvergenceResult run_convergence_study(const Config& cfg) {
    ConvergenceResult res;
    res.Ns = cfg.counts("N");
    res.record_t = cfg.counts("record_t");
    for (auto s : cfg.counts("seeds")) res.seeds.push_back(s);
    const std::size_t T = cfg.count("T"), dim = cfg.count("input_dim"), count = cfg.count("series");
    if (res.Ns.empty() || res.seeds.empty() || res.record_t.empty()) throw ConfigError("convergence: N, seeds and record_t must be non-empty");
    if (!std::is_sorted(res.record_t.begin(), res.record_t.end()) || res.record_t.back() > T || res.record_t.front() < 1)
        throw ConfigError("convergence: record_t must be increasing within [1, T]");
    if (dim < 1 || count < 1) throw ConfigError("convergence: input_dim and series must be positive");
    const auto backends = detail::reservoir_backends(cfg);
    const auto redraws = detail::redraw_modes(cfg);

    struct Cell {
        ConvergenceKey key;
        std::size_t seed_idx, n_idx;
    };
    std::vector<Cell> cells;
    std::vector<Activation> acts;
    for (const auto& a : cfg.list("activations")) acts.push_back(parse_activation(a));
    for (auto act : acts) {
        try {
            (void)kernel_for(act);
        } catch (const KindError& e) {
            throw ConfigError(std::string("convergence: ") + e.what());
        }
        for (double s2 : cfg.reals("sigma_r2_list"))
            for (auto be : backends)
                for (bool rd : redraws) {
                    ConvergenceKey key{act, s2, be, rd};
                    res.mse[key].assign(res.seeds.size(), std::vector<std::vector<double>>(res.Ns.size()));
                    for (std::size_t si = 0; si < res.seeds.size(); ++si)
                        for (std::size_t ni = 0; ni < res.Ns.size(); ++ni) cells.push_back({key, si, ni});
                }
    }

    const double sigma_i2 = cfg.real("sigma_i2"), sigma_b2 = cfg.real("sigma_b2");
    // Inputs and kernel targets depend only on (seed, activation, sigma_r^2).
    std::map<std::tuple<std::size_t, Activation, double>, std::vector<Eigen::MatrixXd>> targets;
    std::vector<std::vector<RowMatrix>> inputs;
    for (auto s : res.seeds) inputs.push_back(gaussian_inputs(count, T, dim, s));
    for (std::size_t si = 0; si < res.seeds.size(); ++si)
        for (auto act : acts)
            for (double s2 : cfg.reals("sigma_r2_list"))
                targets[{si, act, s2}] = detail::kernel_targets(inputs[si], {kernel_for(act), s2, sigma_i2, sigma_b2}, res.record_t);

    parallel_for(cells.size(), cfg.count("workers"), [&](std::size_t begin, std::size_t end) {
        for (std::size_t c = begin; c < end; ++c) {
            const Cell& cell = cells[c];
            ReservoirParams p;
            p.N = res.Ns[cell.n_idx];
            p.d = dim;
            p.sigma_r = std::sqrt(cell.key.sigma_r2);
            p.sigma_i = std::sqrt(sigma_i2);
            p.sigma_b = std::sqrt(sigma_b2);
            p.activation = cell.key.activation;
            p.backend = cell.key.backend;
            p.redraw = cell.key.redraw;
            p.seed = derive_key(res.seeds[cell.seed_idx], 0xc0de + p.N);
            const WeightSet w = init_weights(p);
            ReservoirDriver driver(p, w);
            const auto& in = inputs[cell.seed_idx];
            const auto& K = targets.at({cell.seed_idx, cell.key.activation, cell.key.sigma_r2});
            Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.state_dim()), static_cast<Eigen::Index>(count));
            std::vector<double> out;
            std::size_t next = 0;
            for (std::size_t t = 0; t < T && next < res.record_t.size(); ++t) {
                x = driver.advance(x, in[t].transpose());
                if (t + 1 == res.record_t[next]) {
                    const Eigen::MatrixXd G = x.transpose() * x;
                    out.push_back((G - K[next]).squaredNorm() / static_cast<double>(G.size()));
                    ++next;
                }
            }
            res.mse[cell.key][cell.seed_idx][cell.n_idx] = std::move(out);
        }
    });
    return res;
}

inline ResultRecord to_record(const ConvergenceResult& r, const Config& cfg) {
    ResultRecord rec;
    rec.experiment = "convergence";
    rec.config_hash = cfg.hash();
    rec.results.columns = {"config_hash", "seed", "activation", "sigma_r2", "algorithm", "redraw", "N", "t", "mse"};
    Table slopes;
    slopes.columns = {"config_hash", "seed", "activation", "sigma_r2", "algorithm", "redraw", "t", "loglog_slope"};
    for (const auto& [k, per_seed] : r.mse) {
        const std::string alg = k.backend == Backend::dense ? "rc" : "src";
        for (std::size_t si = 0; si < r.seeds.size(); ++si)
            for (std::size_t ni = 0; ni < r.Ns.size(); ++ni)
                for (std::size_t ti = 0; ti < r.record_t.size(); ++ti)
                    rec.results.add({rec.config_hash, std::to_string(r.seeds[si]), std::string(to_string(k.activation)), fmt(k.sigma_r2), alg,
                                     k.redraw ? "on" : "off", fmt(r.Ns[ni]), fmt(r.record_t[ti]), fmt(per_seed[si][ni][ti])});
        if (r.Ns.size() >= 2)
            for (std::size_t ti = 0; ti < r.record_t.size(); ++ti) {
                std::string slope = "nan";
                try {
                    slope = fmt(r.slope(k, ti));
                } catch (const NumericError&) {
                }
                slopes.add({rec.config_hash, "all", std::string(to_string(k.activation)), fmt(k.sigma_r2), alg, k.redraw ? "on" : "off",
                            fmt(r.record_t[ti]), slope});
            }
    }
    rec.curves["mse_slopes"] = std::move(slopes);
    rec.meta["study"] = "mse";
    return rec;
}

// ---------------------------------------------------------------------------------
// Finite-N concentration bound

inline double theta_bound(std::size_t N, double kappa, double delta) {
    const double lg = std::log(1.0 / delta), n = static_cast<double>(N);
    return 4.0 * kappa * kappa * lg / (3.0 * n) + 2.0 * kappa * kappa * std::sqrt(2.0 * lg / n);
}

/// (1 + Lambda + ... + Lambda^t) Theta, the bound after t+1 updates.
inline double recursive_bound(double Lambda, std::size_t t, double theta) {
    if (std::abs(Lambda - 1.0) < 1e-12) return static_cast<double>(t + 1) * theta;
    return (1.0 - std::pow(Lambda, static_cast<double>(t + 1))) / (1.0 - Lambda) * theta;
}

struct BoundResult {
    Activation activation = Activation::erf;
    std::size_t N = 0;
    double delta = 0.05;
    double kappa = 1.0;
    double lipschitz = 0.0;
    double Lambda = 0.0;
    double theta = 0.0;
    std::size_t trials = 0;
    std::vector<double> bound;              ///< per update count s = 1..T
    std::vector<double> violation_fraction;  ///< per s
    std::vector<double> allowed;             ///< 2 s delta
    std::vector<double> max_deviation;       ///< per s
};

/// Draws `trials` independent pairs of input series and redrawn-weight reservoirs and
/// counts how often |<x^(s), y^(s)> - k_s| exceeds the recursive bound. Lambda is
/// sigma_r^2 L for rotation-invariant kernels and 2 sigma_r^2 L for translation-
/// invariant ones, with L the largest kernel slope over the arguments reached.
inline BoundResult run_bound_study(const Config& cfg, Activation act) {
    const KernelKind kind = kernel_for(act);
    if (!is_bounded(act)) throw ConfigError("bound study: activation must be bounded");
    BoundResult br;
    br.activation = act;
    br.N = cfg.counts("N").front();
    br.delta = cfg.real("delta");
    br.trials = cfg.count("trials");
    const std::size_t T = cfg.count("T"), dim = cfg.count("input_dim");
    const double s_r2 = cfg.real("sigma_r2"), s_i2 = cfg.real("sigma_i2"), s_b2 = cfg.real("sigma_b2");
    const std::uint64_t base_seed = cfg.counts("seeds").front();
    const RKConfig rk{kind, s_r2, s_i2, s_b2};
    const bool ti = family(kind) == KernelFamily::translation_invariant;

    std::vector<std::vector<double>> dev(br.trials, std::vector<double>(T));
    std::vector<double> lip(br.trials, 0.0);
    parallel_for(br.trials, cfg.count("workers"), [&](std::size_t begin, std::size_t end) {
        for (std::size_t tr = begin; tr < end; ++tr) {
            const std::uint64_t seed = derive_key(base_seed, 0xb0b0 + tr);
            const auto frames = gaussian_inputs(2, T, dim, seed);
            ReservoirParams p;
            p.N = br.N;
            p.d = dim;
            p.sigma_r = std::sqrt(s_r2);
            p.sigma_i = std::sqrt(s_i2);
            p.sigma_b = std::sqrt(s_b2);
            p.activation = act;
            p.redraw = true;
            p.seed = seed;
            const WeightSet w = init_weights(p);
            ReservoirDriver driver(p, w);
            Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.state_dim()), 2);
            RKState s = RKState::zeros(2, 2, rk);
            for (std::size_t t = 0; t < T; ++t) {
                // Argument of k at this step, for the kernel and for the empirical states.
                const double l = s_i2 * frames[t].row(0).dot(frames[t].row(1)) + s_b2;
                const double lu = s_i2 * frames[t].row(0).squaredNorm() + s_b2;
                const double lv = s_i2 * frames[t].row(1).squaredNorm() + s_b2;
                double a_k, a_x, su, sv;
                if (ti) {
                    const double D = s_i2 * (frames[t].row(0) - frames[t].row(1)).squaredNorm();
                    a_k = s_r2 * (s.diag_u(0) + s.diag_v(1) - 2 * s.gram(0, 1)) + D;
                    a_x = s_r2 * (x.col(0) - x.col(1)).squaredNorm() + D;
                    su = sv = 0;
                } else {
                    a_k = s_r2 * s.gram(0, 1) + l;
                    a_x = s_r2 * x.col(0).dot(x.col(1)) + l;
                    su = s_r2 * s.diag_u(0) + lu;
                    sv = s_r2 * s.diag_v(1) + lv;
                }
                if (ti) lip[tr] = 0.5;
                else lip[tr] = std::max(lip[tr], kernel_lipschitz(kind, std::min(a_k, a_x), std::max(a_k, a_x), su, sv, 256));
                rk_advance(s, frames[t], frames[t], true);
                x = driver.advance(x, frames[t].transpose());
                dev[tr][t] = std::abs(x.col(0).dot(x.col(1)) - s.gram(0, 1));
            }
        }
    });
    for (double v : lip) br.lipschitz = std::max(br.lipschitz, v);
    br.Lambda = (ti ? 2.0 : 1.0) * s_r2 * br.lipschitz;
    br.theta = theta_bound(br.N, br.kappa, br.delta);
    for (std::size_t t = 0; t < T; ++t) {
        const double b = recursive_bound(br.Lambda, t, br.theta);
        std::size_t viol = 0;
        double mx = 0;
        for (std::size_t tr = 0; tr < br.trials; ++tr) {
            viol += dev[tr][t] > b;
            mx = std::max(mx, dev[tr][t]);
        }
        br.bound.push_back(b);
        br.violation_fraction.push_back(static_cast<double>(viol) / static_cast<double>(br.trials));
        br.allowed.push_back(2.0 * static_cast<double>(t + 1) * br.delta);
        br.max_deviation.push_back(mx);
    }
    return br;
}

inline ResultRecord to_record(const std::vector<BoundResult>& rs, const Config& cfg) {
    ResultRecord rec;
    rec.experiment = "convergence";
    rec.config_hash = cfg.hash();
    rec.results.columns = {"config_hash", "seed", "activation", "N", "t", "bound", "max_deviation", "violation_fraction", "allowed_fraction"};
    const std::string seed = std::to_string(cfg.counts("seeds").front());
    json info = json::array();
    for (const auto& r : rs) {
        for (std::size_t t = 0; t < r.bound.size(); ++t)
            rec.results.add({rec.config_hash, seed, std::string(to_string(r.activation)), fmt(r.N), fmt(t + 1), fmt(r.bound[t]),
                             fmt(r.max_deviation[t]), fmt(r.violation_fraction[t]), fmt(r.allowed[t])});
        info.push_back({{"activation", to_string(r.activation)}, {"lipschitz", r.lipschitz}, {"Lambda", r.Lambda},
                        {"theta", r.theta}, {"kappa", r.kappa}, {"delta", r.delta}, {"trials", r.trials}});
    }
    rec.meta["study"] = "bound";
    rec.meta["bound"] = info;
    return rec;
}

inline ResultRecord run_convergence(const Config& cfg) {
    if (cfg.str("study") == "mse") return to_record(run_convergence_study(cfg), cfg);
    if (cfg.str("study") == "bound") {
        std::vector<BoundResult> rs;
        for (const auto& a : cfg.list("activations")) rs.push_back(run_bound_study(cfg, parse_activation(a)));
        return to_record(rs, cfg);
    }
    throw ConfigError("convergence: study must be mse or bound");
}

}  // namespace reskit::experiments
