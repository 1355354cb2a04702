#include <bit>
#include <cmath>
#include <vector>

#include <catch_amalgamated.hpp>

#include "reskit/rng.hpp"
#include "reskit/transforms.hpp"

using namespace reskit;

namespace {

// Normalized Sylvester-Hadamard matrix from the closed form (-1)^popcount(i & j).
Eigen::MatrixXd sylvester(std::size_t p) {
    Eigen::MatrixXd h(p, p);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) h(i, j) = (std::popcount(i & j) % 2 ? -1.0 : 1.0) / std::sqrt(double(p));
    return h;
}

Eigen::VectorXd random_vector(std::size_t p, std::uint64_t seed) {
    Eigen::VectorXd v(p);
    CounterRng(seed).fill_normal(v, 1.0);
    return v;
}

}  // namespace

TEST_CASE("fwht matches the Sylvester matrix product", "[transforms]") {
    for (std::size_t p = 2; p <= 1024; p *= 2) {
        const Eigen::VectorXd v = random_vector(p, p);
        const Eigen::VectorXd expected = sylvester(p) * v;
        Eigen::VectorXd got = v;
        fwht_in_place(std::span<double>(got.data(), p));
        CHECK((got - expected).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("fwht is an involution and preserves norms", "[transforms]") {
    const Eigen::VectorXd v = random_vector(256, 7);
    Eigen::VectorXd w = v;
    fwht_in_place(std::span<double>(w.data(), 256));
    CHECK(w.norm() == Catch::Approx(v.norm()).epsilon(1e-12));
    fwht_in_place(std::span<double>(w.data(), 256));
    CHECK((w - v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fwht edge cases", "[transforms]") {
    std::vector<double> one{3.5};
    fwht_in_place(one);
    CHECK(one[0] == 3.5);
    std::vector<double> bad(6, 1.0);
    CHECK_THROWS_AS(fwht_in_place(bad), DimensionError);
    std::vector<double> impulse{1, 0, 0, 0};
    fwht_in_place(impulse);
    for (double x : impulse) CHECK(x == Catch::Approx(0.5));
}

TEST_CASE("fwht_columns transforms every column", "[transforms]") {
    Eigen::MatrixXd m(16, 3);
    CounterRng(3).fill_normal(m, 1.0);
    Eigen::MatrixXd got = m;
    fwht_columns(got);
    CHECK((got - sylvester(16) * m).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pad_input zero-pads and rejects long vectors", "[transforms]") {
    Eigen::VectorXd v(3);
    v << 1, 2, 3;
    const Eigen::VectorXd p = pad_input(v, 8);
    CHECK(p.size() == 8);
    CHECK(p.head(3) == v);
    CHECK(p.tail(5).isZero());
    CHECK_THROWS_AS(pad_input(v, 2), DimensionError);
}

TEST_CASE("structured operator equals its explicit matrix product", "[transforms]") {
    const std::size_t p = 32;
    const auto op = StructuredOperator::emulating(p, 0.7, 11);
    const Eigen::MatrixXd H = sylvester(p) * std::sqrt(double(p));  // unnormalized
    const Eigen::MatrixXd explicit_m = op.scale() / std::pow(double(p), 1.5) * H * op.signs(0).asDiagonal() * H *
                                       op.signs(1).asDiagonal() * H * op.signs(2).asDiagonal();
    CHECK((op.materialize() - explicit_m).cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::VectorXd v = random_vector(p, 5);
    CHECK((op.apply(v) - explicit_m * v).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((structured_matvec(op, v) - explicit_m * v).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::MatrixXd cols(p, 2);
    cols << v, 2 * v;
    op.apply_columns(cols);
    CHECK((cols.col(1) - 2 * explicit_m * v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("emulating operator has entry variance sigma^2", "[transforms]") {
    for (std::size_t p : {8u, 64u}) {
        const auto op = StructuredOperator::emulating(p, 0.3, 1);
        const Eigen::MatrixXd m = op.materialize();
        CHECK(m.squaredNorm() / double(p * p) == Catch::Approx(0.09).epsilon(1e-12));
        // Rows are orthogonal with equal norms.
        const Eigen::MatrixXd g = m * m.transpose();
        CHECK((g - g(0, 0) * Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("sign diagonals are deterministic per seed", "[transforms]") {
    const StructuredOperator a(64, 1.0, 9), b(64, 1.0, 9), c(64, 1.0, 10);
    CHECK(a.signs(0) == b.signs(0));
    CHECK(a.signs(2) == b.signs(2));
    CHECK(a.signs(0) != c.signs(0));
    CHECK(a.signs(0).cwiseAbs().minCoeff() == 1.0);
    CHECK_THROWS_AS(StructuredOperator(12, 1.0, 0), DimensionError);
}
