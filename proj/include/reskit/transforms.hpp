#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "reskit/errors.hpp"
#include "reskit/rng.hpp"

namespace reskit {

constexpr bool is_power_of_two(std::size_t n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

constexpr std::size_t next_pow2(std::size_t n) noexcept {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

namespace detail {

// Unnormalized butterflies: leaves sqrt(p) * H * v in place.
inline void fwht_butterflies(double* v, std::size_t p) noexcept {
    for (std::size_t h = 1; h < p; h <<= 1) {
        for (std::size_t i = 0; i < p; i += 2 * h) {
            for (std::size_t j = i; j < i + h; ++j) {
                const double a = v[j];
                const double b = v[j + h];
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
    }
}

inline void require_pow2(std::size_t p, const char* what) {
    if (!is_power_of_two(p))
        throw DimensionError(std::string(what) + ": length " + std::to_string(p) +
                             " is not a power of two");
}

}  // namespace detail

/// Orthonormal Walsh-Hadamard transform in place: v <- H v with H entries +-1/sqrt(p).
inline void fwht_in_place(std::span<double> v) {
    detail::require_pow2(v.size(), "fwht");
    detail::fwht_butterflies(v.data(), v.size());
    const double norm = 1.0 / std::sqrt(static_cast<double>(v.size()));
    for (double& x : v) x *= norm;
}

/// Applies the orthonormal transform to every column of a column-major matrix.
inline void fwht_columns(Eigen::MatrixXd& m) {
    detail::require_pow2(static_cast<std::size_t>(m.rows()), "fwht");
    const auto p = static_cast<std::size_t>(m.rows());
    for (Eigen::Index c = 0; c < m.cols(); ++c) detail::fwht_butterflies(m.col(c).data(), p);
    m *= 1.0 / std::sqrt(static_cast<double>(p));
}

/// Zero-pads `v` to length `p`.
inline Eigen::VectorXd pad_input(const Eigen::Ref<const Eigen::VectorXd>& v, std::size_t p) {
    if (static_cast<std::size_t>(v.size()) > p)
        throw DimensionError("pad_input: input length " + std::to_string(v.size()) +
                             " exceeds target " + std::to_string(p));
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    out.head(v.size()) = v;
    return out;
}

/// scale * H D1 H D2 H D3 with Rademacher diagonals, emulating a dense p x p Gaussian
/// matrix whose entries have standard deviation scale / sqrt(p).
class StructuredOperator {
public:
    StructuredOperator() = default;

    StructuredOperator(std::size_t p, double scale, std::uint64_t seed)
        : p_(p), scale_(scale), seed_(seed) {
        detail::require_pow2(p, "StructuredOperator");
        const auto n = static_cast<Eigen::Index>(p);
        for (int k = 0; k < 3; ++k) {
            const CounterRng rng(derive_key(seed, 0x5167ULL + static_cast<std::uint64_t>(k)));
            signs_[k].resize(n);
            for (Eigen::Index i = 0; i < n; ++i)
                signs_[k][i] = rng.sign(static_cast<std::uint64_t>(i));
        }
    }

    /// Builds the operator that emulates i.i.d. N(0, sigma^2) entries.
    static StructuredOperator emulating(std::size_t p, double sigma, std::uint64_t seed) {
        return {p, std::sqrt(static_cast<double>(p)) * sigma, seed};
    }

    std::size_t p() const noexcept { return p_; }
    double scale() const noexcept { return scale_; }
    std::uint64_t seed() const noexcept { return seed_; }
    /// Diagonals d1, d2, d3 (index 0, 1, 2).
    const Eigen::VectorXd& signs(int k) const { return signs_.at(static_cast<std::size_t>(k)); }

    Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& v) const {
        Eigen::MatrixXd m = v;
        apply_columns(m);
        return m.col(0);
    }

    /// In-place application to every column of `m` (rows must equal p).
    void apply_columns(Eigen::MatrixXd& m) const {
        if (static_cast<std::size_t>(m.rows()) != p_)
            throw DimensionError("structured_matvec: expected length " + std::to_string(p_) +
                                 ", got " + std::to_string(m.rows()));
        const double norm = scale_ / std::pow(static_cast<double>(p_), 1.5);
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            double* col = m.col(c).data();
            Eigen::Map<Eigen::VectorXd> view(col, m.rows());
            view.array() *= signs_[2].array();
            detail::fwht_butterflies(col, p_);
            view.array() *= signs_[1].array();
            detail::fwht_butterflies(col, p_);
            view.array() *= signs_[0].array();
            detail::fwht_butterflies(col, p_);
        }
        m *= norm;
    }

    /// Explicit p x p matrix; O(p^2 log p), intended for checks on small p.
    Eigen::MatrixXd materialize() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p_),
                                                      static_cast<Eigen::Index>(p_));
        apply_columns(m);
        return m;
    }

private:
    std::size_t p_ = 1;
    double scale_ = 1.0;
    std::uint64_t seed_ = 0;
    std::array<Eigen::VectorXd, 3> signs_;
};

inline Eigen::VectorXd structured_matvec(const StructuredOperator& op,
                                         const Eigen::Ref<const Eigen::VectorXd>& v) {
    return op.apply(v);
}

}  // namespace reskit
