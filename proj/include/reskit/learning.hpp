#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "reskit/errors.hpp"
#include "reskit/recurrent_kernel.hpp"
#include "reskit/reservoir.hpp"
#include "reskit/series.hpp"

namespace reskit {

enum class RidgeMode { primal, dual };

struct RidgeModel {
    RidgeMode mode = RidgeMode::primal;
    double alpha = 1e-2;           ///< requested regularization
    double alpha_used = 1e-2;      ///< after jitter escalation
    double r = 1.0;                ///< weight of the concatenated input
    Eigen::MatrixXd weights;       ///< c x F (primal) or c x n (dual)
    std::size_t N = 0, d = 0, tau = 0;

    std::size_t outputs() const noexcept { return static_cast<std::size_t>(weights.rows()); }
    std::size_t features() const noexcept { return static_cast<std::size_t>(weights.cols()); }
};

/// Solves (S + alpha I) X = B for symmetric PSD S by Cholesky, escalating the jitter to
/// 10 alpha and 100 alpha on failure. Returns X and the alpha that succeeded.
inline std::pair<Eigen::MatrixXd, double> solve_regularized(const Eigen::MatrixXd& S, const Eigen::MatrixXd& B,
                                                            double alpha) {
    if (S.rows() != S.cols() || S.rows() != B.rows()) throw DimensionError("ridge: normal matrix shape mismatch");
    if (!(alpha >= 0.0)) throw NumericError("ridge: alpha must be >= 0");
    if (!S.allFinite() || !B.allFinite()) throw NumericError("ridge: non-finite design or targets");
    const double escalation[] = {1.0, 10.0, 100.0};
    for (double f : escalation) {
        const double a = alpha * f;
        Eigen::MatrixXd M = S;
        M.diagonal().array() += a;
        Eigen::LLT<Eigen::MatrixXd> llt(M);
        if (llt.info() == Eigen::Success && (alpha > 0.0 || llt.rcond() > 1e-13)) return {llt.solve(B), a};
        if (alpha == 0.0) break;
    }
    Eigen::MatrixXd M = S;
    M.diagonal().array() += alpha * 100.0;
    const double pivot = Eigen::LDLT<Eigen::MatrixXd>(M).vectorD().minCoeff();
    throw ConditioningError("ridge: factorization failed (smallest pivot " + std::to_string(pivot) + ")", pivot);
}

/// Ridge regression on rows of `design` (n x F, or an n x n Gram in dual mode)
/// against `targets` (n x c).
inline RidgeModel ridge_fit(const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets, double alpha,
                            RidgeMode mode = RidgeMode::primal) {
    if (design.rows() < 1) throw DimensionError("ridge: need at least one sample");
    if (design.rows() != targets.rows()) throw DimensionError("ridge: design and targets differ in rows");
    RidgeModel m;
    m.mode = mode;
    m.alpha = alpha;
    if (mode == RidgeMode::primal) {
        Eigen::MatrixXd S = Eigen::MatrixXd::Zero(design.cols(), design.cols());
        S.selfadjointView<Eigen::Lower>().rankUpdate(design.transpose());
        S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
        auto [X, a] = solve_regularized(S, design.transpose() * targets, alpha);
        m.weights = X.transpose();
        m.alpha_used = a;
    } else {
        if (design.rows() != design.cols()) throw DimensionError("ridge: dual mode needs a square Gram matrix");
        auto [X, a] = solve_regularized(design, targets, alpha);
        m.weights = X.transpose();
        m.alpha_used = a;
    }
    return m;
}

/// Primal ridge from feature columns (F x n) and target columns (c x n).
inline RidgeModel ridge_fit_columns(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets, double alpha) {
    if (features.cols() != targets.cols()) throw DimensionError("ridge: features and targets differ in samples");
    if (features.cols() < 1) throw DimensionError("ridge: need at least one sample");
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(features.rows(), features.rows());
    S.selfadjointView<Eigen::Lower>().rankUpdate(features);
    S.triangularView<Eigen::StrictlyUpper>() = S.transpose();
    auto [X, a] = solve_regularized(S, features * targets.transpose(), alpha);
    RidgeModel m;
    m.mode = RidgeMode::primal;
    m.alpha = alpha;
    m.alpha_used = a;
    m.weights = X.transpose();
    return m;
}

/// Regularized objective |targets - design W^T|^2 + alpha_used |W|^2.
inline double ridge_objective(const RidgeModel& m, const Eigen::MatrixXd& design, const Eigen::MatrixXd& targets,
                              const Eigen::MatrixXd& weights) {
    (void)m;
    return (targets - design * weights.transpose()).squaredNorm() + m.alpha_used * weights.squaredNorm();
}

inline Eigen::VectorXd predict_step(const RidgeModel& m, const Eigen::Ref<const Eigen::VectorXd>& features) {
    if (static_cast<std::size_t>(features.size()) != m.features())
        throw DimensionError("predict: expected " + std::to_string(m.features()) + " features, got " +
                             std::to_string(features.size()));
    return m.weights * features;
}

/// Reservoir (dense or structured) plus the readout scale r.
struct ReservoirMachine {
    ReservoirParams params;
    const WeightSet* weights = nullptr;
    double r = 1.0;
    std::size_t warmup = 100;
};

/// Recurrent-kernel machinery: training windows plus the readout scale r.
struct KernelMachine {
    RKConfig cfg;
    const WindowBatch* train = nullptr;
    double r = 1.0;
};

/// Trains the next-frame readout on [x ; r i] features; targets are i^(t+1).
inline RidgeModel fit_reservoir_readout(const TimeSeries& series, const ReservoirMachine& rm, double alpha) {
    if (series.length() < rm.warmup + 2) throw DimensionError("fit: series shorter than warm-up + 2");
    const Eigen::MatrixXd states = run(series, rm.params, *rm.weights, rm.warmup);
    const auto n = states.cols() - 1;  // last state has no successor frame
    const auto S = states.rows();
    const auto d = static_cast<Eigen::Index>(series.dim());
    Eigen::MatrixXd feats(S + d, n);
    feats.topRows(S) = states.leftCols(n);
    feats.bottomRows(d) = rm.r * series.values.middleRows(static_cast<Eigen::Index>(rm.warmup), n).transpose();
    const Eigen::MatrixXd targets = series.values.middleRows(static_cast<Eigen::Index>(rm.warmup) + 1, n).transpose();
    RidgeModel m = ridge_fit_columns(feats, targets, alpha);
    m.r = rm.r;
    m.N = rm.params.N;
    m.d = rm.params.d;
    return m;
}

/// Direct multi-step readout: features [x ; r i] at frame t predict the stacked frames
/// i^(t+1), ..., i^(t+horizon). Normal equations are accumulated per output block, so
/// the d * horizon target matrix is never formed.
inline RidgeModel fit_direct_readout(const TimeSeries& series, const ReservoirMachine& rm, double alpha,
                                     std::size_t horizon) {
    if (horizon < 1) throw DimensionError("fit_direct: horizon must be >= 1");
    if (series.length() < rm.warmup + horizon + 1) throw DimensionError("fit_direct: series too short for the horizon");
    const Eigen::MatrixXd states = run(series, rm.params, *rm.weights, rm.warmup);
    const auto n = static_cast<Eigen::Index>(series.length() - rm.warmup - horizon);
    const auto S = states.rows();
    const auto d = static_cast<Eigen::Index>(series.dim());
    const auto w0 = static_cast<Eigen::Index>(rm.warmup);
    Eigen::MatrixXd feats(S + d, n);
    feats.topRows(S) = states.leftCols(n);
    feats.bottomRows(d) = rm.r * series.values.middleRows(w0, n).transpose();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(S + d, S + d);
    G.selfadjointView<Eigen::Lower>().rankUpdate(feats);
    G.triangularView<Eigen::StrictlyUpper>() = G.transpose();
    Eigen::MatrixXd B(S + d, d * static_cast<Eigen::Index>(horizon));
    for (std::size_t h = 0; h < horizon; ++h)
        B.middleCols(static_cast<Eigen::Index>(h) * d, d).noalias() =
            feats * series.values.middleRows(w0 + 1 + static_cast<Eigen::Index>(h), n);
    auto [X, a] = solve_regularized(G, B, alpha);
    RidgeModel m;
    m.mode = RidgeMode::primal;
    m.alpha = alpha;
    m.alpha_used = a;
    m.weights = X.transpose();
    m.r = rm.r;
    m.N = rm.params.N;
    m.d = rm.params.d;
    return m;
}

/// Dual readout over training windows with targets (n x c).
inline RidgeModel fit_kernel_readout(const WindowBatch& train, const RowMatrix& targets, const KernelMachine& km,
                                     double alpha) {
    if (targets.rows() != static_cast<Eigen::Index>(train.count()))
        throw DimensionError("fit: one target row per window required");
    const Eigen::MatrixXd G = add_linear_kernel(build_gram_train(train, km.cfg), train.last(), train.last(), km.r);
    RidgeModel m = ridge_fit(G, targets, alpha, RidgeMode::dual);
    m.r = km.r;
    m.d = train.dim();
    m.tau = train.tau();
    return m;
}

namespace detail {

inline void check_finite_frame(const Eigen::MatrixXd& frame, std::size_t step) {
    if (!frame.allFinite()) throw DivergenceError("forecast: non-finite prediction", step);
}

}  // namespace detail

/// Closed-loop forecasts for K warm-up series at once (all of equal length): each
/// series is fed, then predictions are fed back for `horizon` steps. Returns one
/// horizon x d series per start.
inline std::vector<TimeSeries> forecast_closed_loop_batch(const RidgeModel& m, const ReservoirMachine& rm,
                                                          const std::vector<TimeSeries>& warm,
                                                          std::size_t horizon) {
    std::vector<TimeSeries> out;
    if (warm.empty()) return out;
    const std::size_t W = warm[0].length();
    const auto d = static_cast<Eigen::Index>(rm.params.d);
    const auto K = static_cast<Eigen::Index>(warm.size());
    if (W < 1) throw DimensionError("forecast: warm-up series is empty");
    for (const auto& w : warm)
        if (w.length() != W || w.dim() != rm.params.d) throw DimensionError("forecast: warm-up series shapes differ");
    const auto S = static_cast<Eigen::Index>(rm.params.state_dim());
    if (m.features() != static_cast<std::size_t>(S + d)) throw DimensionError("forecast: model/reservoir size mismatch");
    ReservoirDriver driver(rm.params, *rm.weights);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(S, K);
    Eigen::MatrixXd in(d, K);
    for (std::size_t t = 0; t < W; ++t) {
        for (Eigen::Index k = 0; k < K; ++k) in.col(k) = warm[static_cast<std::size_t>(k)].values.row(static_cast<Eigen::Index>(t)).transpose();
        x = driver.advance(x, in);
    }
    out.assign(warm.size(), TimeSeries(RowMatrix(static_cast<Eigen::Index>(horizon), d), warm[0].dt));
    const auto Wx = m.weights.leftCols(S);
    const auto Wi = m.weights.rightCols(d);
    for (std::size_t h = 0; h < horizon; ++h) {
        Eigen::MatrixXd pred = Wx * x;
        pred.noalias() += (m.r * Wi) * in;
        detail::check_finite_frame(pred, h);
        for (Eigen::Index k = 0; k < K; ++k) out[static_cast<std::size_t>(k)].values.row(static_cast<Eigen::Index>(h)) = pred.col(k).transpose();
        in = pred;
        if (h + 1 < horizon) x = driver.advance(x, in);
    }
    return out;
}

inline TimeSeries forecast_closed_loop(const RidgeModel& m, const ReservoirMachine& rm, const TimeSeries& warm,
                                       std::size_t horizon) {
    return forecast_closed_loop_batch(m, rm, {warm}, horizon).front();
}

/// Kernel closed loop: the last tau frames of each warm-up series form the first test
/// window; each step rebuilds the n x K kernel columns from scratch and slides the
/// windows by one predicted frame.
inline std::vector<TimeSeries> forecast_closed_loop_batch(const RidgeModel& m, const KernelMachine& km,
                                                          const std::vector<TimeSeries>& warm,
                                                          std::size_t horizon) {
    std::vector<TimeSeries> out;
    if (warm.empty()) return out;
    const WindowBatch& train = *km.train;
    const std::size_t tau = train.tau();
    const auto d = static_cast<Eigen::Index>(train.dim());
    const auto K = static_cast<Eigen::Index>(warm.size());
    if (m.features() != train.count()) throw DimensionError("forecast: model/window count mismatch");
    WindowBatch test;
    test.frames.assign(tau, RowMatrix(K, d));
    for (Eigen::Index k = 0; k < K; ++k) {
        const auto& w = warm[static_cast<std::size_t>(k)];
        if (w.length() < tau || static_cast<Eigen::Index>(w.dim()) != d)
            throw DimensionError("forecast: warm-up series shorter than one window");
        for (std::size_t t = 0; t < tau; ++t)
            test.frames[t].row(k) = w.values.row(static_cast<Eigen::Index>(w.length() - tau + t));
    }
    out.assign(warm.size(), TimeSeries(RowMatrix(static_cast<Eigen::Index>(horizon), d), warm[0].dt));
    for (std::size_t h = 0; h < horizon; ++h) {
        const Eigen::MatrixXd k_cols = add_linear_kernel(build_gram_test(train, test, km.cfg), train.last(), test.last(), km.r);
        const Eigen::MatrixXd pred = m.weights * k_cols;  // d x K
        detail::check_finite_frame(pred, h);
        for (Eigen::Index k = 0; k < K; ++k) out[static_cast<std::size_t>(k)].values.row(static_cast<Eigen::Index>(h)) = pred.col(k).transpose();
        for (std::size_t t = 0; t + 1 < tau; ++t) test.frames[t].swap(test.frames[t + 1]);
        test.frames[tau - 1] = pred.transpose();
    }
    return out;
}

inline TimeSeries forecast_closed_loop(const RidgeModel& m, const KernelMachine& km, const TimeSeries& warm,
                                       std::size_t horizon) {
    return forecast_closed_loop_batch(m, km, {warm}, horizon).front();
}

/// Direct multi-step readout: a single prediction of c = d * T_pred outputs, read back
/// as the first `horizon` frames. Frame h occupies outputs [h*d, (h+1)*d).
inline TimeSeries forecast_direct(const RidgeModel& m, const Eigen::Ref<const Eigen::VectorXd>& features,
                                  std::size_t d, std::size_t horizon) {
    const Eigen::VectorXd all = predict_step(m, features);
    if (d == 0 || static_cast<std::size_t>(all.size()) < d * horizon)
        throw DimensionError("forecast_direct: model predicts fewer than horizon frames");
    RowMatrix frames(static_cast<Eigen::Index>(horizon), static_cast<Eigen::Index>(d));
    for (std::size_t h = 0; h < horizon; ++h)
        frames.row(static_cast<Eigen::Index>(h)) = all.segment(static_cast<Eigen::Index>(h * d), static_cast<Eigen::Index>(d)).transpose();
    detail::check_finite_frame(frames, 0);
    return TimeSeries(std::move(frames));
}

/// Per-step |O(t) - O_hat(t)|^2 / d divided by normalizer(t).
inline std::vector<double> nmse_curve(const TimeSeries& pred, const TimeSeries& truth,
                                      const std::vector<double>& normalizer) {
    if (pred.length() != truth.length() || pred.dim() != truth.dim() || normalizer.size() < pred.length())
        throw DimensionError("nmse: prediction, truth and normalizer lengths differ");
    std::vector<double> out(pred.length());
    const double d = static_cast<double>(pred.dim());
    for (std::size_t t = 0; t < out.size(); ++t) {
        if (!(normalizer[t] > 0.0)) throw NumericError("nmse: normalizer entry " + std::to_string(t) + " is not positive");
        const auto r = static_cast<Eigen::Index>(t);
        out[t] = (pred.values.row(r) - truth.values.row(r)).squaredNorm() / d / normalizer[t];
    }
    return out;
}

}  // namespace reskit
