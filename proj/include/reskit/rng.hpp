#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include <Eigen/Dense>

namespace reskit {

// Counter-based generator: value n of stream `key` is a pure function of (key, n),
// so any block of a random matrix can be produced independently and in any order.

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream key from a seed and a stream tag.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL));
}

class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
        return splitmix64(key_ ^ splitmix64(counter));
    }

    /// Uniform in the open interval (0, 1).
    double uniform(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal for entry `n` (Box-Muller over the pair n/2).
    double normal(std::uint64_t n) const noexcept {
        const std::uint64_t pair = n >> 1;
        const double radius = std::sqrt(-2.0 * std::log(uniform(2 * pair)));
        const double angle = 2.0 * std::numbers::pi * uniform(2 * pair + 1);
        return (n & 1U) ? radius * std::sin(angle) : radius * std::cos(angle);
    }

    /// Rademacher sign (+1 or -1) for entry `n`.
    double sign(std::uint64_t n) const noexcept {
        return (bits(n) >> 63) ? 1.0 : -1.0;
    }

    /// Fills `out` with i.i.d. N(0, stddev^2), entry k taking counter `offset + k`
    /// in storage order.
    template <typename Derived>
    void fill_normal(Eigen::DenseBase<Derived>& out, double stddev,
                     std::uint64_t offset = 0) const {
        auto* data = out.derived().data();
        const auto size = static_cast<std::uint64_t>(out.size());
        std::uint64_t k = 0;
        if (offset % 2 == 0) {
            for (; k + 1 < size; k += 2) {
                const std::uint64_t pair = (offset + k) >> 1;
                const double radius = std::sqrt(-2.0 * std::log(uniform(2 * pair)));
                const double angle = 2.0 * std::numbers::pi * uniform(2 * pair + 1);
                data[k] = stddev * radius * std::cos(angle);
                data[k + 1] = stddev * radius * std::sin(angle);
            }
        }
        for (; k < size; ++k) data[k] = stddev * normal(offset + k);
    }

    std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
};

}  // namespace reskit
