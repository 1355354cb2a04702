#include <cmath>
#include <numbers>

#include <catch_amalgamated.hpp>

#include "reskit/ks.hpp"

using namespace reskit;

namespace {

KSConfig small(double L) {
    KSConfig c;
    c.L = L;
    c.grid = 64;
    c.transient = 0;
    return c;
}

Eigen::VectorXd grid_x(const KSConfig& c) {
    return Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(c.grid), 0.0,
                                      c.L * (1.0 - 1.0 / static_cast<double>(c.grid)));
}

}  // namespace

TEST_CASE("zero field is a fixed point", "[ks]") {
    const KSConfig c = small(22);
    const Dataset ds = simulate_ks_from(c, Eigen::VectorXd::Zero(64), 50);
    CHECK(ds.series.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("small modes decay at the linear rate on a short domain", "[ks]") {
    // On L = 5 every nonzero mode has q^2 - q^4 < 0.
    const KSConfig c = small(5.0);
    const double q = 2 * std::numbers::pi / c.L;
    const double rate = q * q - q * q * q * q;
    const double amp = 1e-6;
    const Eigen::VectorXd u0 = amp * (q * grid_x(c)).array().cos().matrix();
    const Dataset ds = simulate_ks_from(c, u0, 40);
    const double t = 40 * c.dt;
    const double expected = amp * std::exp(rate * t);
    const double measured = ds.series.values.row(39).cwiseAbs().maxCoeff();
    CHECK(measured == Catch::Approx(expected).epsilon(1e-6));
}

TEST_CASE("spatial mean is conserved", "[ks]") {
    KSConfig c;
    c.L = 22;
    c.transient = 0;
    Eigen::VectorXd u0 = ks_initial_condition(c);
    u0.array() += 0.3;
    const Dataset ds = simulate_ks_from(c, u0, 400);
    for (Eigen::Index t = 0; t < 400; t += 50) CHECK(ds.series.values.row(t).mean() == Catch::Approx(u0.mean()).margin(1e-10));
}

TEST_CASE("chaotic trajectory is bounded and stationary", "[ks]") {
    KSConfig c;
    const Dataset ds = simulate_ks(c, 8000);
    CHECK(ds.series.values.allFinite());
    const double e1 = ds.series.values.topRows(4000).squaredNorm() / 4000;
    const double e2 = ds.series.values.bottomRows(4000).squaredNorm() / 4000;
    CHECK(std::abs(e1 - e2) / e1 < 0.2);
    CHECK(ds.series.values.cwiseAbs().maxCoeff() < 10.0);
    CHECK(ds.dt_effective == c.dt);
}

TEST_CASE("simulation is deterministic in the seed", "[ks]") {
    KSConfig c;
    c.transient = 100;
    const auto a = simulate_ks(c, 20), b = simulate_ks(c, 20);
    CHECK(a.series.values == b.series.values);
    c.seed = 1;
    CHECK(simulate_ks(c, 20).series.values != a.series.values);
    c.subsample = 4;
    const auto s = simulate_ks(c, 5);
    KSConfig one = c;
    one.subsample = 1;
    CHECK((simulate_ks(one, 20).series.values.row(19) - s.series.values.row(4)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.dt_effective == Catch::Approx(1.0));
}

TEST_CASE("Lyapunov exponent sign", "[ks]") {
    KSConfig c = small(5.0);
    c.transient = 200;
    LyapunovOptions o;
    o.probes = 1;
    o.horizon = 400;
    CHECK(estimate_lyapunov(c, o).lambda < 0.0);
    KSConfig chaotic;
    o.probes = 2;
    o.horizon = 4000;
    const double lam = estimate_lyapunov(chaotic, o).lambda;
    CHECK(lam > 0.02);
    CHECK(lam < 0.08);
}

TEST_CASE("Lyapunov estimate does not depend on the perturbation size", "[ks]") {
    KSConfig c;
    LyapunovOptions o;
    o.probes = 2;
    o.horizon = 4000;
    o.perturbation = 1e-8;
    const double a = estimate_lyapunov(c, o).lambda;
    o.perturbation = 1e-6;
    const double b = estimate_lyapunov(c, o).lambda;
    CHECK(std::abs(a - b) < 0.1 * std::abs(a));
}

TEST_CASE("KS configuration validation", "[ks]") {
    KSConfig c;
    c.grid = 7;
    CHECK_THROWS_AS(simulate_ks(c, 1), DimensionError);
    c = {};
    c.dt = 0;
    CHECK_THROWS_AS(simulate_ks(c, 1), NumericError);
    c = {};
    c.subsample = 0;
    CHECK_THROWS_AS(simulate_ks(c, 1), DimensionError);
    CHECK_THROWS_AS(simulate_ks_from(KSConfig{}, Eigen::VectorXd::Zero(10), 1), DimensionError);
}

TEST_CASE("windowize", "[data]") {
    RowMatrix v(10, 1);
    for (int t = 0; t < 10; ++t) v(t, 0) = t;
    const TimeSeries s(v);
    const Windows w = windowize(s, 3, 2);
    // Starts 0, 2, 4, 6 have a successor frame.
    REQUIRE(w.batch.count() == 4);
    REQUIRE(w.targets.rows() == 4);
    CHECK(w.batch.frames[0](3, 0) == 6);
    CHECK(w.batch.last()(3, 0) == 8);
    CHECK(w.targets(3, 0) == 9);
    CHECK(w.ends == std::vector<std::size_t>{2, 4, 6, 8});
    const Windows whole = windowize(s, 10, 1);
    CHECK(whole.batch.count() == 1);
    CHECK(whole.targets.rows() == 0);
    CHECK(windowize(s, 9, 1).targets(0, 0) == 9);
    CHECK_THROWS_AS(windowize(s, 11, 1), DimensionError);
    CHECK_THROWS_AS(windowize(s, 0, 1), DimensionError);
    CHECK_THROWS_AS(windowize(s, 3, 0), DimensionError);
}

TEST_CASE("unit-power normalization", "[data]") {
    TimeSeries s(RowMatrix::Constant(4, 4, 3.0));
    CHECK(normalize_unit_power(s) == Catch::Approx(1.0 / 6.0));
    CHECK(s.values.row(0).squaredNorm() == Catch::Approx(1.0));
    TimeSeries z(RowMatrix::Zero(2, 2));
    CHECK_THROWS_AS(normalize_unit_power(z), NumericError);
    TimeSeries e;
    CHECK_THROWS_AS(normalize_unit_power(e), DimensionError);
    RowMatrix v(2, 2);
    v << 0.5, -4, 2, 1;
    TimeSeries m(v);
    CHECK(normalize_max_abs(m) == 0.25);
    CHECK(m.values(0, 1) == -1.0);
    CHECK_THROWS_AS(normalize_max_abs(z), NumericError);
}
