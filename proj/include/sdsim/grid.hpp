#pragma once

/// Periodic-box discretization: cubic grid with n points per axis on
/// [-L/2, L/2)^d, frequency lattice xi_k = 2*pi*k/L for k in [-n/2, n/2).

#include <array>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>

#include "errors.hpp"

namespace sdsim {

inline constexpr std::size_t kDefaultPointBudget = std::size_t{1} << 24;

struct SpatialGrid {
    int dim = 1;
    int n = 8;
    double box_length = 1.0;

    double dx() const { return box_length / n; }

    std::size_t point_count() const {
        std::size_t p = 1;
        for (int a = 0; a < dim; ++a) p *= static_cast<std::size_t>(n);
        return p;
    }

    // Physical coordinate of axis index j.
    double coord(int j) const { return -0.5 * box_length + j * dx(); }

    // FFT layout index -> signed lattice index in [-n/2, n/2).
    int signed_index(int k) const { return k < n / 2 ? k : k - n; }

    // Frequency of FFT layout index k.
    double freq(int k) const {
        return 2.0 * std::numbers::pi * signed_index(k) / box_length;
    }

    double freq_spacing() const { return 2.0 * std::numbers::pi / box_length; }
    double freq_min() const { return -freq_spacing() * (n / 2); }
    double nyquist() const { return std::numbers::pi / dx(); }

    // Row-major decomposition of a flat index into per-axis indices.
    std::array<int, 4> unravel(std::size_t flat) const {
        std::array<int, 4> idx{0, 0, 0, 0};
        for (int a = dim - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(flat % n);
            flat /= n;
        }
        return idx;
    }

    bool operator==(const SpatialGrid&) const = default;
};

namespace detail {
// Transform-friendly sizes: 2^k or 3*2^k. The radix-3 family exists to admit
// sizes like 96 while keeping the lattice symmetric (n divisible by 4).
inline bool transform_friendly(int n) {
    if (n < 8) return false;
    while (n % 2 == 0) n /= 2;
    return n == 1 || n == 3;
}
} // namespace detail

inline SpatialGrid make_grid(int d, int n, double L,
                             std::size_t point_budget = kDefaultPointBudget) {
    if (d < 1 || d > 4)
        throw GridError("grid dimension must be in {1,2,3,4}, got " + std::to_string(d));
    if (!detail::transform_friendly(n))
        throw GridError("grid size n=" + std::to_string(n) +
                        " not supported: n must be a power of two (optionally times 3) and >= 8");
    if (!(L > 0.0))
        throw GridError("box length must be > 0");
    std::size_t points = 1;
    for (int a = 0; a < d; ++a) {
        if (points > point_budget / static_cast<std::size_t>(n))
            throw GridError("grid sizing error: " + std::to_string(n) + "^" +
                            std::to_string(d) + " points exceed the budget of " +
                            std::to_string(point_budget));
        points *= static_cast<std::size_t>(n);
    }
    return SpatialGrid{d, n, L};
}

} // namespace sdsim
