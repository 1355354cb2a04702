#include <cmath>
#include <numbers>

#include <catch_amalgamated.hpp>

#include "reskit/recurrent_kernel.hpp"
#include "reskit/reservoir.hpp"

using namespace reskit;

namespace {

ReservoirParams small(Activation a, Backend b = Backend::dense) {
    ReservoirParams p;
    p.N = 40;
    p.d = 3;
    p.sigma_r = 0.8;
    p.sigma_i = 0.5;
    p.sigma_b = 0.2;
    p.activation = a;
    p.backend = b;
    p.seed = 17;
    return p;
}

}  // namespace

TEST_CASE("dense step follows the update formula", "[reservoir]") {
    const auto p = small(Activation::erf);
    const WeightSet w = init_weights(p);
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(40, -0.1, 0.1), in(3);
    in << 0.3, -1.0, 2.0;
    const ReservoirState s = step({x, 0}, in, w, p);
    const Eigen::VectorXd z = w.W_r * x + w.W_i * in + w.b;
    for (Eigen::Index j = 0; j < 40; ++j) CHECK(s.x[j] == Catch::Approx(std::erf(z[j]) / std::sqrt(40.0)).epsilon(1e-14));
    CHECK(s.t == 1);
}

TEST_CASE("zero variances keep the state at zero", "[reservoir]") {
    auto p = small(Activation::erf);
    p.sigma_r = p.sigma_i = p.sigma_b = 0;
    const WeightSet w = init_weights(p);
    TimeSeries s(RowMatrix::Random(5, 3));
    CHECK(run(s, p, w).isZero());
}

TEST_CASE("random Fourier feature states have unit norm", "[reservoir]") {
    const auto p = small(Activation::rff);
    const WeightSet w = init_weights(p);
    CHECK(p.state_dim() == 80);
    const Eigen::MatrixXd states = run(TimeSeries(RowMatrix::Random(4, 3)), p, w);
    CHECK(states.rows() == 80);
    for (Eigen::Index c = 0; c < states.cols(); ++c) CHECK(states.col(c).norm() == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("structured backend applies the emulated operator", "[reservoir]") {
    const auto p = small(Activation::erf, Backend::structured);
    const WeightSet w = init_weights(p);
    CHECK(p.padded_dim() == 64);
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(40, -0.2, 0.3), in(3);
    in << 1.0, 0.5, -0.5;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(64);
    u.head(40) = p.sigma_r * x;
    u.segment(40, 3) = p.sigma_i * in;
    const Eigen::VectorXd z = (w.op.materialize() * u).head(40) + w.b;
    const Eigen::MatrixXd pre = preactivation(x, in, w, p);
    CHECK((pre.col(0) - z).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("weights are deterministic and seed dependent", "[reservoir]") {
    auto p = small(Activation::erf);
    CHECK(init_weights(p) == init_weights(p));
    auto q = p;
    q.seed = 18;
    CHECK(!(init_weights(p) == init_weights(q)));
    auto s = small(Activation::erf, Backend::structured);
    CHECK(init_weights(s) == init_weights(s));
}

TEST_CASE("redraw resamples weights per step and keeps the bias", "[reservoir]") {
    auto p = small(Activation::erf);
    p.redraw = true;
    WeightSet w = init_weights(p);
    const WeightSet w0 = w;
    redraw_weights(w, p, 3);
    CHECK(w.b == w0.b);
    CHECK(w.W_r != w0.W_r);
    auto q = p;
    q.seed = redraw_seed(p.seed, 3);
    CHECK(w.W_r == init_weights(q).W_r);
    // A redraw run differs from a fixed-weight run after the first step.
    auto fixed = p;
    fixed.redraw = false;
    const TimeSeries s(RowMatrix::Random(3, 3));
    const Eigen::MatrixXd a = run(s, p, w0), b = run(s, fixed, w0);
    CHECK((a.col(0) - b.col(0)).norm() < 1e-15);
    CHECK((a.col(2) - b.col(2)).norm() > 1e-6);
}

TEST_CASE("driver and run agree", "[reservoir]") {
    const auto p = small(Activation::relu);
    const WeightSet w = init_weights(p);
    const TimeSeries s(RowMatrix::Random(6, 3));
    const Eigen::MatrixXd states = run(s, p, w, 2);
    CHECK(states.cols() == 4);
    ReservoirDriver drv(p, w);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(40, 1);
    for (std::size_t t = 0; t < 6; ++t) x = drv.advance(x, s.frame(t));
    CHECK((x.col(0) - states.col(3)).norm() < 1e-14);
}

TEST_CASE("reservoir input validation", "[reservoir]") {
    const auto p = small(Activation::erf);
    const WeightSet w = init_weights(p);
    Eigen::VectorXd in(3);
    in << 1, std::nan(""), 0;
    CHECK_THROWS_AS(step({Eigen::VectorXd::Zero(40), 0}, in, w, p), NumericError);
    CHECK_THROWS_AS(step({Eigen::VectorXd::Zero(40), 0}, Eigen::VectorXd::Zero(2), w, p), DimensionError);
    CHECK_THROWS_AS(parse_activation("softplus"), ConfigError);
    CHECK(parse_activation("heaviside") == Activation::heaviside);
    CHECK(concat_state(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(1), 2.0) == Eigen::Vector3d(1, 1, 2));
}

TEST_CASE("wide reservoir inner products approach the kernel", "[reservoir][kernel]") {
    // One step from the zero state: <x, y> is a Monte-Carlo estimate of k.
    for (Activation a : {Activation::erf, Activation::rff, Activation::sign}) {
        ReservoirParams p;
        p.N = 4000;
        p.d = 4;
        p.sigma_r = 1.0;
        p.sigma_i = 0.7;
        p.sigma_b = 0.0;
        p.activation = a;
        p.seed = 99;
        const WeightSet w = init_weights(p);
        RowMatrix frames(2, 4);
        frames << 0.5, -0.2, 0.1, 0.9, 0.3, 0.4, -0.6, 0.2;
        const Eigen::MatrixXd x = step_batch(Eigen::MatrixXd::Zero(p.state_dim(), 2), frames.transpose(), w, p);
        const RKConfig rk = RKConfig::from(p);
        RKState s = RKState::zeros(2, 2, rk);
        rk_advance(s, frames, frames, true);
        CHECK(std::abs(x.col(0).dot(x.col(1)) - s.gram(0, 1)) < 5.0 / std::sqrt(4000.0));
        // The structured operator stays cheap at large width.
        p.N = 60000;
        p.backend = Backend::structured;
        const WeightSet ws = init_weights(p);
        const Eigen::MatrixXd xs = step_batch(Eigen::MatrixXd::Zero(p.state_dim(), 2), frames.transpose(), ws, p);
        CHECK(std::abs(xs.col(0).dot(xs.col(1)) - s.gram(0, 1)) < 5.0 / std::sqrt(60000.0));
    }
}
