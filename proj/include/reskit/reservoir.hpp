#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "reskit/errors.hpp"
#include "reskit/rng.hpp"
#include "reskit/series.hpp"
#include "reskit/transforms.hpp"

namespace reskit {

enum class Activation { erf, relu, rff, sign, heaviside, tanh };
enum class Backend { dense, structured };

inline std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::erf: return "erf";
        case Activation::relu: return "relu";
        case Activation::rff: return "rff";
        case Activation::sign: return "sign";
        case Activation::heaviside: return "heaviside";
        case Activation::tanh: return "tanh";
    }
    return "?";
}

inline Activation parse_activation(std::string_view s) {
    for (auto a : {Activation::erf, Activation::relu, Activation::rff, Activation::sign,
                   Activation::heaviside, Activation::tanh})
        if (to_string(a) == s) return a;
    throw ConfigError("unknown activation '" + std::string(s) + "'");
}

inline std::string_view to_string(Backend b) { return b == Backend::dense ? "dense" : "structured"; }

inline Backend parse_backend(std::string_view s) {
    if (s == "dense" || s == "rc") return Backend::dense;
    if (s == "structured" || s == "src") return Backend::structured;
    throw ConfigError("unknown backend '" + std::string(s) + "'");
}

inline bool is_bounded(Activation a) noexcept { return a != Activation::relu; }

struct ReservoirParams {
    std::size_t N = 100;
    std::size_t d = 1;
    double sigma_r = 1.0;
    double sigma_i = 1.0;
    double sigma_b = 0.0;
    Activation activation = Activation::erf;
    Backend backend = Backend::dense;
    bool redraw = false;
    std::uint64_t seed = 0;

    /// Length of the state vector: 2N for random Fourier features, N otherwise.
    std::size_t state_dim() const noexcept { return activation == Activation::rff ? 2 * N : N; }

    /// Padded transform size for the structured backend.
    std::size_t padded_dim() const noexcept { return next_pow2(state_dim() + d); }

    void validate() const {
        if (N < 1 || d < 1) throw DimensionError("reservoir: N and d must be >= 1");
        if (!(sigma_r >= 0.0) || !(sigma_i >= 0.0) || !(sigma_b >= 0.0))
            throw NumericError("reservoir: standard deviations must be non-negative");
    }
};

struct WeightSet {
    Backend backend = Backend::dense;
    Eigen::MatrixXd W_r;  ///< N x state_dim (dense only)
    Eigen::MatrixXd W_i;  ///< N x d (dense only)
    StructuredOperator op;  ///< emulates [W_r, W_i] on pre-scaled input (structured only)
    Eigen::VectorXd b;

    bool operator==(const WeightSet& o) const {
        if (backend != o.backend || b != o.b) return false;
        if (backend == Backend::dense) return W_r == o.W_r && W_i == o.W_i;
        return op.p() == o.op.p() && op.scale() == o.op.scale() && op.signs(0) == o.op.signs(0) &&
               op.signs(1) == o.op.signs(1) && op.signs(2) == o.op.signs(2);
    }
};

struct ReservoirState {
    Eigen::VectorXd x;
    std::size_t t = 0;
};

namespace detail {

inline constexpr std::uint64_t kStreamReservoir = 1;
inline constexpr std::uint64_t kStreamInput = 2;
inline constexpr std::uint64_t kStreamBias = 3;
inline constexpr std::uint64_t kStreamSigns = 4;
inline constexpr std::uint64_t kStreamInitState = 5;

// Fills the recurrent and input weights (never the bias) for `seed`.
inline void fill_recurrent_weights(WeightSet& w, const ReservoirParams& p, std::uint64_t seed) {
    const auto N = static_cast<Eigen::Index>(p.N);
    if (p.backend == Backend::dense) {
        w.W_r.resize(N, static_cast<Eigen::Index>(p.state_dim()));
        w.W_i.resize(N, static_cast<Eigen::Index>(p.d));
        CounterRng(derive_key(seed, kStreamReservoir)).fill_normal(w.W_r, p.sigma_r);
        CounterRng(derive_key(seed, kStreamInput)).fill_normal(w.W_i, p.sigma_i);
    } else {
        w.op = StructuredOperator::emulating(p.padded_dim(), 1.0, derive_key(seed, kStreamSigns));
    }
}

}  // namespace detail

/// Seed used for the weights of step t in redraw mode; step 0 keeps the initial draw.
constexpr std::uint64_t redraw_seed(std::uint64_t seed, std::size_t t) noexcept {
    return t == 0 ? seed : seed ^ splitmix64(static_cast<std::uint64_t>(t));
}

inline WeightSet init_weights(const ReservoirParams& params) {
    params.validate();
    WeightSet w;
    w.backend = params.backend;
    detail::fill_recurrent_weights(w, params, params.seed);
    w.b.resize(static_cast<Eigen::Index>(params.N));
    CounterRng(derive_key(params.seed, detail::kStreamBias)).fill_normal(w.b, params.sigma_b);
    return w;
}

/// Regenerates W_r and W_i (or the structured signs) in place for step t; keeps the bias.
inline void redraw_weights(WeightSet& w, const ReservoirParams& params, std::size_t t) {
    detail::fill_recurrent_weights(w, params, redraw_seed(params.seed, t));
}

/// Random initial state f(z)/sqrt(N), z ~ N(0, 1); used for echo-state studies.
inline Eigen::VectorXd random_initial_state(const ReservoirParams& params, std::uint64_t seed);

namespace detail {

inline double activate(Activation a, double z) noexcept {
    switch (a) {
        case Activation::erf: return std::erf(z);
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::sign: return static_cast<double>((z > 0.0) - (z < 0.0));
        case Activation::heaviside: return z > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::rff: return std::cos(z);
    }
    return 0.0;
}

// Maps pre-activations (N x K) to states (state_dim x K), including the 1/sqrt(N) factor.
inline Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& z) {
    const double norm = 1.0 / std::sqrt(static_cast<double>(z.rows()));
    if (a == Activation::rff) {
        Eigen::MatrixXd out(2 * z.rows(), z.cols());
        out.topRows(z.rows()) = z.array().cos() * norm;
        out.bottomRows(z.rows()) = z.array().sin() * norm;
        return out;
    }
    Eigen::MatrixXd out(z.rows(), z.cols());
    const double* src = z.data();
    double* dst = out.data();
    for (Eigen::Index k = 0; k < z.size(); ++k) dst[k] = norm * activate(a, src[k]);
    return out;
}

}  // namespace detail

/// Pre-activations W_r X + W_i I + b for a batch of K states (columns).
inline Eigen::MatrixXd preactivation(const Eigen::MatrixXd& states, const Eigen::MatrixXd& inputs,
                                     const WeightSet& w, const ReservoirParams& params) {
    const auto S = static_cast<Eigen::Index>(params.state_dim());
    const auto d = static_cast<Eigen::Index>(params.d);
    const auto N = static_cast<Eigen::Index>(params.N);
    if (states.rows() != S || inputs.rows() != d || states.cols() != inputs.cols())
        throw DimensionError("reservoir step: expected state " + std::to_string(S) + " and input " +
                             std::to_string(d) + " rows with matching batch size");
    Eigen::MatrixXd z;
    if (w.backend == Backend::dense) {
        z.noalias() = w.W_r * states;
        z.noalias() += w.W_i * inputs;
    } else {
        Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(w.op.p()), states.cols());
        u.topRows(S) = params.sigma_r * states;
        u.middleRows(S, d) = params.sigma_i * inputs;
        w.op.apply_columns(u);
        z = u.topRows(N);
    }
    z.colwise() += w.b;
    return z;
}

/// One update for a batch of K independent states sharing the weights `w`.
/// Redraw is the caller's responsibility here (see ReservoirDriver).
inline Eigen::MatrixXd step_batch(const Eigen::MatrixXd& states, const Eigen::MatrixXd& inputs,
                                  const WeightSet& w, const ReservoirParams& params) {
    if (!inputs.allFinite()) throw NumericError("reservoir step: non-finite input");
    return detail::apply_activation(params.activation, preactivation(states, inputs, w, params));
}

/// x' = f(W_r x + W_i i + b) / sqrt(N). In redraw mode the weights of step `state.t`
/// are regenerated from the base seed before the update.
inline ReservoirState step(const ReservoirState& state, const Eigen::Ref<const Eigen::VectorXd>& input,
                           const WeightSet& w, const ReservoirParams& params) {
    Eigen::MatrixXd xs = state.x;
    Eigen::MatrixXd in = input;
    Eigen::MatrixXd next;
    if (params.redraw) {
        WeightSet wt = w;
        redraw_weights(wt, params, state.t);
        next = step_batch(xs, in, wt, params);
    } else {
        next = step_batch(xs, in, w, params);
    }
    return {next.col(0), state.t + 1};
}

/// Drives one or more reservoirs through time. Without redraw the weights are borrowed
/// and must outlive the driver; with redraw a private copy is regenerated every step.
class ReservoirDriver {
public:
    ReservoirDriver(const ReservoirParams& params, const WeightSet& weights)
        : params_(params), base_(&weights) {
        if (params_.redraw) scratch_ = weights;
    }

    const ReservoirParams& params() const noexcept { return params_; }
    std::size_t time() const noexcept { return t_; }

    void reset(std::size_t t = 0) { t_ = t; }

    /// Advances the batch `states` by one step with `inputs` (d x K).
    Eigen::MatrixXd advance(const Eigen::MatrixXd& states, const Eigen::MatrixXd& inputs) {
        const WeightSet* w = base_;
        if (params_.redraw) {
            redraw_weights(*scratch_, params_, t_);
            w = &*scratch_;
        }
        ++t_;
        return step_batch(states, inputs, *w, params_);
    }

private:
    ReservoirParams params_;
    const WeightSet* base_;
    std::optional<WeightSet> scratch_;
    std::size_t t_ = 0;
};

/// Runs from the zero state over the whole series; column j of the result is the
/// state after consuming frame record_from + j.
inline Eigen::MatrixXd run(const TimeSeries& series, const ReservoirParams& params, const WeightSet& w,
                           std::size_t record_from = 0,
                           const std::optional<Eigen::VectorXd>& initial = std::nullopt) {
    const auto S = static_cast<Eigen::Index>(params.state_dim());
    if (!series.empty() && series.dim() != params.d)
        throw DimensionError("reservoir run: series dimension " + std::to_string(series.dim()) +
                             " != d = " + std::to_string(params.d));
    const std::size_t T = series.length();
    const std::size_t kept = record_from < T ? T - record_from : 0;
    Eigen::MatrixXd out(S, static_cast<Eigen::Index>(kept));
    Eigen::MatrixXd x = initial ? Eigen::MatrixXd(*initial) : Eigen::MatrixXd::Zero(S, 1);
    ReservoirDriver driver(params, w);
    for (std::size_t t = 0; t < T; ++t) {
        Eigen::MatrixXd in = series.values.row(static_cast<Eigen::Index>(t)).transpose();
        x = driver.advance(x, in);
        if (t >= record_from) out.col(static_cast<Eigen::Index>(t - record_from)) = x.col(0);
    }
    return out;
}

/// Readout feature [x ; r * input].
inline Eigen::VectorXd concat_state(const Eigen::Ref<const Eigen::VectorXd>& x,
                                    const Eigen::Ref<const Eigen::VectorXd>& input, double r) {
    Eigen::VectorXd out(x.size() + input.size());
    out << x, r * input;
    return out;
}

inline Eigen::VectorXd random_initial_state(const ReservoirParams& params, std::uint64_t seed) {
    Eigen::MatrixXd z(static_cast<Eigen::Index>(params.N), 1);
    CounterRng(derive_key(seed, detail::kStreamInitState)).fill_normal(z, 1.0);
    return detail::apply_activation(params.activation, z).col(0);
}

}  // namespace reskit
