#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "reskit/errors.hpp"
#include "reskit/recurrent_kernel.hpp"
#include "reskit/rng.hpp"
#include "reskit/series.hpp"

namespace reskit {

inline constexpr const char* kKsGeneratorVersion = "reskit-ks-etdrk4/1";

struct KSConfig {
    double L = 22.0;
    std::size_t grid = 100;
    double dt = 0.25;
    std::size_t subsample = 1;
    std::size_t transient = 2000;
    std::uint64_t seed = 0;
    double init_amplitude = 1e-2;

    void validate() const {
        if (grid < 8 || grid % 2 != 0) throw DimensionError("ks: grid must be even and >= 8");
        if (!(dt > 0.0)) throw NumericError("ks: dt must be positive");
        if (!(L > 0.0)) throw NumericError("ks: L must be positive");
        if (subsample < 1) throw DimensionError("ks: subsample must be >= 1");
    }
};

struct Dataset {
    TimeSeries series;
    double dt_effective = 1.0;
    double lyapunov = std::numeric_limits<double>::quiet_NaN();
    KSConfig config;
    std::string generator = kKsGeneratorVersion;

    std::size_t length() const noexcept { return series.length(); }
    std::size_t dim() const noexcept { return series.dim(); }
};

/// Pseudo-spectral ETDRK4 integrator for u_t = -u u_x - u_xx - u_xxxx on a periodic
/// domain, with 2/3-rule dealiasing of the quadratic term. The state is the half
/// spectrum of a real field, so Hermitian symmetry holds exactly.
class KSIntegrator {
public:
    using Spectrum = Eigen::VectorXcd;

    explicit KSIntegrator(const KSConfig& cfg) : cfg_(cfg), n_(static_cast<Eigen::Index>(cfg.grid)) {
        cfg.validate();
        fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
        const Eigen::Index modes = n_ / 2 + 1;
        const double h = cfg.dt;
        const std::complex<double> I(0.0, 1.0);
        E_.resize(modes);
        E2_.resize(modes);
        Q_.resize(modes);
        f1_.resize(modes);
        f2_.resize(modes);
        f3_.resize(modes);
        g_.resize(modes);
        dealias_.resize(modes);
        constexpr int M = 32;
        for (Eigen::Index j = 0; j < modes; ++j) {
            const double q = 2.0 * std::numbers::pi * static_cast<double>(j) / cfg.L;
            const double lin = q * q - q * q * q * q;
            E_[j] = std::exp(h * lin);
            E2_[j] = std::exp(h * lin / 2.0);
            // The Nyquist mode carries no odd derivative.
            g_[j] = j == n_ / 2 ? std::complex<double>(0.0) : -0.5 * I * q;
            dealias_[j] = static_cast<double>(j) < static_cast<double>(n_) / 3.0 ? 1.0 : 0.0;
            // Contour-integral evaluation of the phi-functions (Kassam & Trefethen).
            std::complex<double> q_acc = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
            for (int m = 1; m <= M; ++m) {
                const std::complex<double> r = std::exp(I * std::numbers::pi * (m - 0.5) / static_cast<double>(M));
                const std::complex<double> z = h * lin + r;
                const std::complex<double> ez = std::exp(z);
                q_acc += (std::exp(z / 2.0) - 1.0) / z;
                a1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / (z * z * z);
                a2 += (2.0 + z + ez * (-2.0 + z)) / (z * z * z);
                a3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / (z * z * z);
            }
            Q_[j] = h * (q_acc / static_cast<double>(M)).real();
            f1_[j] = h * (a1 / static_cast<double>(M)).real();
            f2_[j] = h * (a2 / static_cast<double>(M)).real();
            f3_[j] = h * (a3 / static_cast<double>(M)).real();
        }
        real_buf_.resize(static_cast<std::size_t>(n_));
        spec_buf_.resize(static_cast<std::size_t>(modes));
    }

    const KSConfig& config() const noexcept { return cfg_; }

    Spectrum to_spectral(const Eigen::VectorXd& u) {
        if (u.size() != n_) throw DimensionError("ks: field length != grid");
        real_buf_.assign(u.data(), u.data() + n_);
        fft_.fwd(spec_buf_, real_buf_);
        return Eigen::Map<const Spectrum>(spec_buf_.data(), static_cast<Eigen::Index>(spec_buf_.size()));
    }

    Eigen::VectorXd to_physical(const Spectrum& v) {
        spec_buf_.assign(v.data(), v.data() + v.size());
        fft_.inv(real_buf_, spec_buf_, static_cast<std::size_t>(n_));
        return Eigen::Map<const Eigen::VectorXd>(real_buf_.data(), n_);
    }

    /// One ETDRK4 step in spectral space.
    void step(Spectrum& v) {
        const Spectrum Nv = nonlinear(v);
        const Spectrum a = E2_.cwiseProduct(v) + Q_.cwiseProduct(Nv);
        const Spectrum Na = nonlinear(a);
        const Spectrum b = E2_.cwiseProduct(v) + Q_.cwiseProduct(Na);
        const Spectrum Nb = nonlinear(b);
        const Spectrum c = E2_.cwiseProduct(a) + Q_.cwiseProduct(2.0 * Nb - Nv);
        const Spectrum Nc = nonlinear(c);
        v = E_.cwiseProduct(v) + Nv.cwiseProduct(f1_) + 2.0 * (Na + Nb).cwiseProduct(f2_) + Nc.cwiseProduct(f3_);
    }

private:
    // -1/2 (u^2)_x in spectral space, computed from the dealiased field.
    Spectrum nonlinear(const Spectrum& v) {
        const Eigen::Index modes = v.size();
        spec_buf_.resize(static_cast<std::size_t>(modes));
        for (Eigen::Index j = 0; j < modes; ++j) spec_buf_[static_cast<std::size_t>(j)] = v[j] * dealias_[j];
        fft_.inv(real_buf_, spec_buf_, static_cast<std::size_t>(n_));
        for (double& x : real_buf_) x *= x;
        fft_.fwd(spec_buf_, real_buf_);
        Spectrum res(modes);
        for (Eigen::Index j = 0; j < modes; ++j) res[j] = g_[j] * spec_buf_[static_cast<std::size_t>(j)] * dealias_[j];
        return res;
    }

    KSConfig cfg_;
    Eigen::Index n_;
    Spectrum E_, E2_, g_;
    Eigen::VectorXd Q_, f1_, f2_, f3_, dealias_;
    std::vector<double> real_buf_;
    std::vector<std::complex<double>> spec_buf_;
    Eigen::FFT<double> fft_;
};

/// Seeded small-amplitude Gaussian initial field.
inline Eigen::VectorXd ks_initial_condition(const KSConfig& cfg) {
    Eigen::VectorXd u(static_cast<Eigen::Index>(cfg.grid));
    CounterRng(derive_key(cfg.seed, 0x4b53ULL)).fill_normal(u, cfg.init_amplitude);
    return u;
}

/// Integrates from `u0`, discards `cfg.transient` raw steps, then records `frames`
/// snapshots spaced `cfg.subsample` raw steps apart.
inline Dataset simulate_ks_from(const KSConfig& cfg, const Eigen::VectorXd& u0, std::size_t frames) {
    KSIntegrator integ(cfg);
    if (static_cast<std::size_t>(u0.size()) != cfg.grid) throw DimensionError("ks: initial field length != grid");
    KSIntegrator::Spectrum v = integ.to_spectral(u0);
    std::size_t raw = 0;
    auto advance = [&](std::size_t steps) {
        for (std::size_t s = 0; s < steps; ++s, ++raw) {
            integ.step(v);
            if (!v.allFinite()) throw IntegrationError("ks: non-finite field", raw + 1);
        }
    };
    advance(cfg.transient);
    Dataset ds;
    ds.config = cfg;
    ds.dt_effective = cfg.dt * static_cast<double>(cfg.subsample);
    ds.series.dt = ds.dt_effective;
    ds.series.values.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(cfg.grid));
    for (std::size_t f = 0; f < frames; ++f) {
        advance(cfg.subsample);
        const Eigen::VectorXd u = integ.to_physical(v);
        if (!u.allFinite()) throw IntegrationError("ks: non-finite field", raw);
        ds.series.values.row(static_cast<Eigen::Index>(f)) = u.transpose();
    }
    return ds;
}

/// Trajectory of `steps` recorded frames starting from the seeded initial condition.
inline Dataset simulate_ks(const KSConfig& cfg, std::size_t steps) {
    cfg.validate();
    return simulate_ks_from(cfg, ks_initial_condition(cfg), steps);
}

struct LyapunovOptions {
    std::size_t probes = 4;
    std::size_t horizon = 4000;      ///< raw integrator steps per probe
    std::size_t renorm_every = 20;   ///< raw steps between renormalizations
    double perturbation = 1e-8;
};

struct LyapunovEstimate {
    double lambda = 0.0;
    std::vector<double> per_probe;
    bool chaotic() const noexcept { return lambda > 0.0; }
};

/// Largest Lyapunov exponent (per unit time) from twin trajectories with periodic
/// renormalization of the separation. Probe k starts from the attractor point reached
/// with seed cfg.seed + k.
inline LyapunovEstimate estimate_lyapunov(const KSConfig& cfg, const LyapunovOptions& opt = {}) {
    cfg.validate();
    KSIntegrator integ(cfg);
    LyapunovEstimate est;
    for (std::size_t k = 0; k < opt.probes; ++k) {
        KSConfig pc = cfg;
        pc.seed = cfg.seed + k;
        Eigen::VectorXd u = ks_initial_condition(pc);
        KSIntegrator::Spectrum v = integ.to_spectral(u);
        for (std::size_t s = 0; s < cfg.transient; ++s) integ.step(v);
        u = integ.to_physical(v);
        Eigen::VectorXd dir(u.size());
        CounterRng(derive_key(pc.seed, 0x1a9bULL)).fill_normal(dir, 1.0);
        dir -= Eigen::VectorXd::Constant(dir.size(), dir.mean());
        dir *= opt.perturbation / dir.norm();
        KSIntegrator::Spectrum w = integ.to_spectral(u + dir);
        double log_growth = 0.0;
        std::size_t done = 0;
        while (done < opt.horizon) {
            const std::size_t chunk = std::min(opt.renorm_every, opt.horizon - done);
            for (std::size_t s = 0; s < chunk; ++s) {
                integ.step(v);
                integ.step(w);
            }
            done += chunk;
            const Eigen::VectorXd a = integ.to_physical(v), b = integ.to_physical(w);
            if (!a.allFinite() || !b.allFinite()) throw IntegrationError("ks lyapunov: non-finite field", done);
            const double sep = (b - a).norm();
            if (sep == 0.0) {
                log_growth = -std::numeric_limits<double>::infinity();
                break;
            }
            log_growth += std::log(sep / opt.perturbation);
            w = integ.to_spectral(a + (b - a) * (opt.perturbation / sep));
        }
        est.per_probe.push_back(log_growth / (static_cast<double>(done) * cfg.dt));
    }
    double sum = 0.0;
    for (double l : est.per_probe) sum += l;
    est.lambda = est.per_probe.empty() ? 0.0 : sum / static_cast<double>(est.per_probe.size());
    return est;
}

/// Slope of log|u1 - u2| vs time for two trajectories started `perturbation` apart,
/// fitted over the samples whose separation stays below `saturation`.
inline double fit_divergence_rate(const KSConfig& cfg, double perturbation, std::size_t steps,
                                  double saturation = 1e-2) {
    cfg.validate();
    KSIntegrator integ(cfg);
    KSIntegrator::Spectrum v = integ.to_spectral(ks_initial_condition(cfg));
    for (std::size_t s = 0; s < cfg.transient; ++s) integ.step(v);
    const Eigen::VectorXd u = integ.to_physical(v);
    Eigen::VectorXd dir(u.size());
    CounterRng(derive_key(cfg.seed, 0x1a9bULL)).fill_normal(dir, 1.0);
    dir -= Eigen::VectorXd::Constant(dir.size(), dir.mean());
    KSIntegrator::Spectrum w = integ.to_spectral(u + dir * (perturbation / dir.norm()));
    std::vector<double> ts, logs;
    for (std::size_t s = 1; s <= steps; ++s) {
        integ.step(v);
        integ.step(w);
        const double sep = (integ.to_physical(w) - integ.to_physical(v)).norm();
        if (!(sep < saturation)) break;
        ts.push_back(static_cast<double>(s) * cfg.dt);
        logs.push_back(std::log(sep));
    }
    if (ts.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double n = static_cast<double>(ts.size());
    double mt = 0, ml = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) mt += ts[k], ml += logs[k];
    mt /= n;
    ml /= n;
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) sxy += (ts[k] - mt) * (logs[k] - ml), sxx += (ts[k] - mt) * (ts[k] - mt);
    return sxy / sxx;
}

/// Multiplies the series by the factor that makes the mean squared frame norm 1 and
/// returns that factor.
inline double normalize_unit_power(TimeSeries& series) {
    if (series.empty()) throw DimensionError("normalize: empty series");
    const double power = series.values.squaredNorm() / static_cast<double>(series.length());
    if (!(power > 0.0) || !std::isfinite(power)) throw NumericError("normalize: series has no finite energy");
    const double factor = 1.0 / std::sqrt(power);
    series.values *= factor;
    return factor;
}

/// Multiplies the series by the factor that makes its largest absolute entry 1 and
/// returns that factor.
inline double normalize_max_abs(TimeSeries& series) {
    if (series.empty()) throw DimensionError("normalize: empty series");
    const double peak = series.values.cwiseAbs().maxCoeff();
    if (!(peak > 0.0) || !std::isfinite(peak)) throw NumericError("normalize: series has no finite nonzero entry");
    series.values /= peak;
    return 1.0 / peak;
}

/// Sliding windows [s, s + tau) with start s = k * stride, each paired with the
/// frame that follows it when one exists.
struct Windows {
    WindowBatch batch;
    RowMatrix targets;              ///< one row per window that has a successor frame
    std::vector<std::size_t> ends;  ///< index of the last frame of each window
};

inline Windows windowize(const TimeSeries& series, std::size_t tau, std::size_t stride) {
    const std::size_t T = series.length();
    if (tau < 1 || tau > T) throw DimensionError("windowize: tau " + std::to_string(tau) + " exceeds series length " + std::to_string(T));
    if (stride < 1) throw DimensionError("windowize: stride must be >= 1");
    const std::size_t count = T == tau ? 1 : (T - tau - 1) / stride + 1;
    Windows w;
    const auto d = static_cast<Eigen::Index>(series.dim());
    w.batch.frames.assign(tau, RowMatrix(static_cast<Eigen::Index>(count), d));
    std::size_t with_target = 0;
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t start = k * stride;
        for (std::size_t t = 0; t < tau; ++t)
            w.batch.frames[t].row(static_cast<Eigen::Index>(k)) = series.values.row(static_cast<Eigen::Index>(start + t));
        w.ends.push_back(start + tau - 1);
        if (start + tau < T) ++with_target;
    }
    w.targets.resize(static_cast<Eigen::Index>(with_target), d);
    for (std::size_t k = 0; k < with_target; ++k)
        w.targets.row(static_cast<Eigen::Index>(k)) = series.values.row(static_cast<Eigen::Index>(w.ends[k] + 1));
    return w;
}

}  // namespace reskit
