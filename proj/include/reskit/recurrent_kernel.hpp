#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "reskit/errors.hpp"
#include "reskit/parallel.hpp"
#include "reskit/reservoir.hpp"
#include "reskit/rng.hpp"
#include "reskit/series.hpp"

namespace reskit {

enum class KernelKind { arcsine_erf, gaussian_rff, arcsine_sign, heaviside, arccos1_relu };
enum class KernelFamily { rotation_invariant, translation_invariant };

inline KernelFamily family(KernelKind k) noexcept {
    return k == KernelKind::gaussian_rff ? KernelFamily::translation_invariant
                                         : KernelFamily::rotation_invariant;
}

inline std::string_view to_string(KernelKind k) {
    switch (k) {
        case KernelKind::arcsine_erf: return "arcsine_erf";
        case KernelKind::gaussian_rff: return "gaussian_rff";
        case KernelKind::arcsine_sign: return "arcsine_sign";
        case KernelKind::heaviside: return "heaviside";
        case KernelKind::arccos1_relu: return "arccos1_relu";
    }
    return "?";
}

/// Kernel that a reservoir with activation `a` converges to. tanh has no closed form.
inline KernelKind kernel_for(Activation a) {
    switch (a) {
        case Activation::erf: return KernelKind::arcsine_erf;
        case Activation::rff: return KernelKind::gaussian_rff;
        case Activation::sign: return KernelKind::arcsine_sign;
        case Activation::heaviside: return KernelKind::heaviside;
        case Activation::relu: return KernelKind::arccos1_relu;
        case Activation::tanh: break;
    }
    throw KindError("no closed-form recurrent kernel for activation '" +
                    std::string(to_string(a)) + "'");
}

inline Activation activation_for(KernelKind k) noexcept {
    switch (k) {
        case KernelKind::arcsine_erf: return Activation::erf;
        case KernelKind::gaussian_rff: return Activation::rff;
        case KernelKind::arcsine_sign: return Activation::sign;
        case KernelKind::heaviside: return Activation::heaviside;
        case KernelKind::arccos1_relu: return Activation::relu;
    }
    return Activation::erf;
}

namespace detail {

inline double clamp_unit(double x) noexcept { return std::clamp(x, -1.0, 1.0); }

// Cosine of the angle; zero when either norm vanishes.
inline double correlation(double dot, double sq_u, double sq_v) noexcept {
    const double denom = std::sqrt(sq_u * sq_v);
    return denom > 0.0 ? clamp_unit(dot / denom) : 0.0;
}

}  // namespace detail

/// Closed-form kernel k(u, v) of a random-feature map, as a function of <u,v>, |u|^2
/// and |v|^2. The weights are standard Gaussian.
inline double kernel_scalar(KernelKind kind, double dot, double sq_u, double sq_v) noexcept {
    using std::numbers::pi;
    switch (kind) {
        case KernelKind::arcsine_erf:
            return (2.0 / pi) *
                   std::asin(detail::clamp_unit(2.0 * dot / std::sqrt((1.0 + 2.0 * sq_u) * (1.0 + 2.0 * sq_v))));
        case KernelKind::gaussian_rff:
            return std::exp(-0.5 * std::max(0.0, sq_u + sq_v - 2.0 * dot));
        case KernelKind::arcsine_sign:
            return (2.0 / pi) * std::asin(detail::correlation(dot, sq_u, sq_v));
        case KernelKind::heaviside:
            return 0.5 - std::acos(detail::correlation(dot, sq_u, sq_v)) / (2.0 * pi);
        case KernelKind::arccos1_relu: {
            const double rho = detail::correlation(dot, sq_u, sq_v);
            const double norms = std::sqrt(sq_u * sq_v);
            if (norms == 0.0) return 0.0;
            return (norms * rho * std::acos(-rho) + norms * std::sqrt(std::max(0.0, 1.0 - rho * rho))) /
                   (2.0 * pi);
        }
    }
    return 0.0;
}

/// Variances of the weight distributions entering the recursion.
struct RKConfig {
    KernelKind kind = KernelKind::arcsine_erf;
    double sigma_r2 = 1.0;
    double sigma_i2 = 1.0;
    double sigma_b2 = 0.0;
    std::size_t workers = 1;

    static RKConfig from(const ReservoirParams& p) {
        return {kernel_for(p.activation), p.sigma_r * p.sigma_r, p.sigma_i * p.sigma_i,
                p.sigma_b * p.sigma_b};
    }
};

/// Recurrent-kernel iterate K^(t) between two sets of series, plus the self-kernels
/// k_t(u,u), k_t(v,v) that norm-dependent kernels need.
struct RKState {
    Eigen::MatrixXd gram;
    Eigen::VectorXd diag_u;
    Eigen::VectorXd diag_v;
    std::size_t t = 0;
    RKConfig cfg;

    /// K^(0) = 0, the zero-initial-state convention.
    static RKState zeros(std::size_t n, std::size_t m, const RKConfig& cfg) {
        const auto rn = static_cast<Eigen::Index>(n), rm = static_cast<Eigen::Index>(m);
        return {Eigen::MatrixXd::Zero(rn, rm), Eigen::VectorXd::Zero(rn), Eigen::VectorXd::Zero(rm), 0, cfg};
    }

    /// All-ones initialization (used to probe the kernel's echo-state behaviour).
    static RKState ones(std::size_t n, std::size_t m, const RKConfig& cfg) {
        const auto rn = static_cast<Eigen::Index>(n), rm = static_cast<Eigen::Index>(m);
        return {Eigen::MatrixXd::Ones(rn, rm), Eigen::VectorXd::Ones(rn), Eigen::VectorXd::Ones(rm), 0, cfg};
    }
};

/// One rotation-invariant update: K <- k(sigma_r^2 K + L) entrywise. `L` holds
/// sigma_i^2 <i,j> + sigma_b^2 and `self_u`, `self_v` the matching self terms.
inline void rk_update_ri(RKState& s, const Eigen::MatrixXd& L, const Eigen::VectorXd& self_u,
                         const Eigen::VectorXd& self_v, bool symmetric = false) {
    if (family(s.cfg.kind) != KernelFamily::rotation_invariant)
        throw KindError("rk_update_ri called with translation-invariant kernel");
    if (L.rows() != s.gram.rows() || L.cols() != s.gram.cols() || self_u.size() != s.gram.rows() ||
        self_v.size() != s.gram.cols())
        throw DimensionError("rk_update_ri: shape mismatch");
    const double sr2 = s.cfg.sigma_r2;
    const KernelKind kind = s.cfg.kind;
    const Eigen::VectorXd nu = sr2 * s.diag_u + self_u;
    const Eigen::VectorXd nv = sr2 * s.diag_v + self_v;
    const auto cols = static_cast<std::size_t>(s.gram.cols());
    parallel_for(cols, s.cfg.workers, [&](std::size_t c0, std::size_t c1) {
        for (auto c = static_cast<Eigen::Index>(c0); c < static_cast<Eigen::Index>(c1); ++c) {
            const Eigen::Index r_end = symmetric ? c + 1 : s.gram.rows();
            for (Eigen::Index r = 0; r < r_end; ++r)
                s.gram(r, c) = kernel_scalar(kind, sr2 * s.gram(r, c) + L(r, c), nu[r], nv[c]);
        }
    });
    if (symmetric) s.gram.triangularView<Eigen::StrictlyLower>() = s.gram.transpose();
    for (Eigen::Index r = 0; r < nu.size(); ++r) s.diag_u[r] = kernel_scalar(kind, nu[r], nu[r], nu[r]);
    for (Eigen::Index c = 0; c < nv.size(); ++c) s.diag_v[c] = kernel_scalar(kind, nv[c], nv[c], nv[c]);
    ++s.t;
}

/// One translation-invariant update: K <- exp(-(sigma_r^2 |x-y|^2 + Delta) / 2), with
/// |x-y|^2 = |x|^2 + |y|^2 - 2K. After the first step |x|^2 = |y|^2 = 1.
inline void rk_update_ti(RKState& s, const Eigen::MatrixXd& D) {
    if (family(s.cfg.kind) != KernelFamily::translation_invariant)
        throw KindError("rk_update_ti called with rotation-invariant kernel");
    if (D.rows() != s.gram.rows() || D.cols() != s.gram.cols())
        throw DimensionError("rk_update_ti: shape mismatch");
    const double sr2 = s.cfg.sigma_r2;
    const auto cols = static_cast<std::size_t>(s.gram.cols());
    parallel_for(cols, s.cfg.workers, [&](std::size_t c0, std::size_t c1) {
        for (auto c = static_cast<Eigen::Index>(c0); c < static_cast<Eigen::Index>(c1); ++c)
            for (Eigen::Index r = 0; r < s.gram.rows(); ++r) {
                const double dist = std::max(0.0, s.diag_u[r] + s.diag_v[c] - 2.0 * s.gram(r, c));
                s.gram(r, c) = std::exp(-0.5 * (sr2 * dist + D(r, c)));
            }
    });
    s.diag_u.setOnes();
    s.diag_v.setOnes();
    ++s.t;
}

/// Advances `s` by one time step given frame t of every u-series (n x d) and v-series (m x d).
inline void rk_advance(RKState& s, const RowMatrix& frames_u, const RowMatrix& frames_v,
                       bool symmetric = false) {
    if (frames_u.cols() != frames_v.cols()) throw DimensionError("rk_advance: input dimension mismatch");
    const RKConfig& c = s.cfg;
    const Eigen::MatrixXd dots = frames_u * frames_v.transpose();
    const Eigen::VectorXd sq_u = frames_u.rowwise().squaredNorm();
    const Eigen::VectorXd sq_v = frames_v.rowwise().squaredNorm();
    if (family(c.kind) == KernelFamily::rotation_invariant) {
        const Eigen::MatrixXd L = (c.sigma_i2 * dots).array() + c.sigma_b2;
        const Eigen::VectorXd su = (c.sigma_i2 * sq_u).array() + c.sigma_b2;
        const Eigen::VectorXd sv = (c.sigma_i2 * sq_v).array() + c.sigma_b2;
        rk_update_ri(s, L, su, sv, symmetric);
    } else {
        Eigen::MatrixXd D = -2.0 * dots;
        D.colwise() += sq_u;
        D.rowwise() += sq_v.transpose();
        rk_update_ti(s, c.sigma_i2 * D.cwiseMax(0.0));
    }
}

/// n series of common length tau and dimension d, stored time-major so that frame t
/// of every series is one n x d block.
struct WindowBatch {
    std::vector<RowMatrix> frames;

    std::size_t tau() const noexcept { return frames.size(); }
    std::size_t count() const noexcept { return frames.empty() ? 0 : static_cast<std::size_t>(frames[0].rows()); }
    std::size_t dim() const noexcept { return frames.empty() ? 0 : static_cast<std::size_t>(frames[0].cols()); }

    /// Checks that every frame block has the same shape.
    void validate() const {
        for (const auto& f : frames)
            if (f.rows() != frames[0].rows() || f.cols() != frames[0].cols())
                throw DimensionError("window batch: inconsistent window shapes");
    }

    /// Batch made of the listed series (each tau x d).
    static WindowBatch from_series(const std::vector<RowMatrix>& series) {
        WindowBatch b;
        if (series.empty()) return b;
        const auto tau = series[0].rows(), d = series[0].cols();
        for (const auto& s : series)
            if (s.rows() != tau || s.cols() != d)
                throw DimensionError("window batch: inconsistent window shapes");
        b.frames.assign(static_cast<std::size_t>(tau), RowMatrix(static_cast<Eigen::Index>(series.size()), d));
        for (std::size_t k = 0; k < series.size(); ++k)
            for (Eigen::Index t = 0; t < tau; ++t)
                b.frames[static_cast<std::size_t>(t)].row(static_cast<Eigen::Index>(k)) = series[k].row(t);
        return b;
    }

    /// Sub-batch with the selected series.
    WindowBatch select(const std::vector<std::size_t>& idx) const {
        WindowBatch b;
        b.frames.reserve(frames.size());
        for (const auto& f : frames) {
            RowMatrix sub(static_cast<Eigen::Index>(idx.size()), f.cols());
            for (std::size_t k = 0; k < idx.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = f.row(static_cast<Eigen::Index>(idx[k]));
            b.frames.push_back(std::move(sub));
        }
        return b;
    }

    /// Last frame of every series (count x d).
    const RowMatrix& last() const { return frames.back(); }
};

namespace detail {

inline void check_pair(const WindowBatch& u, const WindowBatch& v) {
    u.validate();
    v.validate();
    if (u.count() > 0 && v.count() > 0 && (u.tau() != v.tau() || u.dim() != v.dim()))
        throw DimensionError("gram: windows must share length and dimension (tau " +
                             std::to_string(u.tau()) + " vs " + std::to_string(v.tau()) + ")");
}

}  // namespace detail

/// Symmetric n x n Gram matrix G^(tau) over the training windows.
inline Eigen::MatrixXd build_gram_train(const WindowBatch& windows, const RKConfig& cfg) {
    windows.validate();
    RKState s = RKState::zeros(windows.count(), windows.count(), cfg);
    for (const auto& f : windows.frames) rk_advance(s, f, f, family(cfg.kind) == KernelFamily::rotation_invariant);
    return s.gram;
}

/// Rectangular n x m matrix K^(tau) between training and test windows.
inline Eigen::MatrixXd build_gram_test(const WindowBatch& train, const WindowBatch& test, const RKConfig& cfg) {
    detail::check_pair(train, test);
    RKState s = RKState::zeros(train.count(), test.count(), cfg);
    if (train.count() == 0 || test.count() == 0) return s.gram;
    for (std::size_t t = 0; t < train.tau(); ++t) rk_advance(s, train.frames[t], test.frames[t]);
    return s.gram;
}

/// gram + r^2 <i_k, j_l>: kernel counterpart of concatenating the current input.
inline Eigen::MatrixXd add_linear_kernel(const Eigen::MatrixXd& gram, const RowMatrix& last_u,
                                         const RowMatrix& last_v, double r) {
    if (last_u.rows() != gram.rows() || last_v.rows() != gram.cols() || last_u.cols() != last_v.cols())
        throw DimensionError("add_linear_kernel: shape mismatch");
    Eigen::MatrixXd out = gram;
    out.noalias() += (r * r) * (last_u * last_v.transpose());
    return out;
}

struct MonteCarloEstimate {
    double mean = 0.0;
    double stddev = 0.0;  ///< sample standard deviation of the per-feature products
    std::size_t features = 0;

    double standard_error() const noexcept {
        return features > 1 ? stddev / std::sqrt(static_cast<double>(features)) : 0.0;
    }
};

/// Random-feature estimate (1/N) sum_k f(<w_k,u>) f(<w_k,v>) with w_k ~ N(0, I).
inline MonteCarloEstimate mc_kernel_estimate_stats(KernelKind kind, const Eigen::VectorXd& u,
                                                   const Eigen::VectorXd& v, std::size_t N,
                                                   std::uint64_t seed) {
    if (u.size() != v.size()) throw DimensionError("mc_kernel_estimate: u and v differ in length");
    if (N < 1) throw DimensionError("mc_kernel_estimate: N must be >= 1");
    const Activation act = activation_for(kind);
    const CounterRng rng(derive_key(seed, 0x3c6ef372ULL));
    const auto p = static_cast<std::size_t>(u.size());
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        double a = 0.0, b = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double w = rng.normal(k * p + j);
            a += w * u[static_cast<Eigen::Index>(j)];
            b += w * v[static_cast<Eigen::Index>(j)];
        }
        const double prod = act == Activation::rff ? std::cos(a - b)
                                                   : detail::activate(act, a) * detail::activate(act, b);
        sum += prod;
        sum_sq += prod * prod;
    }
    const double n = static_cast<double>(N);
    const double mean = sum / n;
    const double var = N > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
    return {mean, std::sqrt(var), N};
}

inline double mc_kernel_estimate(KernelKind kind, const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                 std::size_t N, std::uint64_t seed) {
    return mc_kernel_estimate_stats(kind, u, v, N, seed).mean;
}

/// Largest absolute finite-difference slope of k(dot, sq_u, sq_v) in `dot` over
/// [lo, hi] (RI) or of k(Delta) over [lo, hi] (TI, Delta = |u-v|^2).
inline double kernel_lipschitz(KernelKind kind, double lo, double hi, double sq_u, double sq_v,
                               std::size_t samples = 4096) {
    if (!(hi > lo)) return 0.0;
    auto eval = [&](double a) {
        return family(kind) == KernelFamily::translation_invariant ? std::exp(-0.5 * std::max(0.0, a))
                                                                   : kernel_scalar(kind, a, sq_u, sq_v);
    };
    const double h = (hi - lo) / static_cast<double>(samples);
    double best = 0.0;
    double prev = eval(lo);
    for (std::size_t k = 1; k <= samples; ++k) {
        const double cur = eval(lo + h * static_cast<double>(k));
        best = std::max(best, std::abs(cur - prev) / h);
        prev = cur;
    }
    return best;
}

}  // namespace reskit
