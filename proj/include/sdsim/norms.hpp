#pragma once

/// Spatial norms. All quadratures carry the physical measure dx^d so values
/// approximate continuum integrals; the spectral-side L2 uses the matching
/// frequency measure (2*pi)^{-d} dxi, i.e. L^{-d} times the lattice sum.

#include <cmath>
#include <limits>

#include "spectral.hpp"

namespace sdsim {

namespace detail {
inline double cell_volume(const SpatialGrid& g) {
    double w = 1.0;
    for (int a = 0; a < g.dim; ++a) w *= g.dx();
    return w;
}
inline double freq_cell_weight(const SpatialGrid& g) {
    double w = 1.0;
    for (int a = 0; a < g.dim; ++a) w /= g.box_length;
    return w;
}
} // namespace detail

template <typename Field>
double lp_norm(const Field& f, double p) {
    if (p < 1.0) throw DomainError("lp_norm: p must be >= 1");
    if constexpr (std::is_same_v<Field, ComplexField>)
        require_domain(f, Domain::physical, "lp_norm");
    if (std::isinf(p)) {
        double m = 0.0;
        for (const auto& v : f.values) m = std::max(m, std::abs(v));
        return m;
    }
    double acc = 0.0;
    for (const auto& v : f.values) acc += std::pow(std::abs(v), p);
    return std::pow(acc * detail::cell_volume(f.grid), 1.0 / p);
}

// L2 norm of a spectral-domain field under the frequency measure; equals the
// physical L2 norm by Parseval.
inline double spectral_l2_norm(const ComplexField& F) {
    require_domain(F, Domain::spectral, "spectral_l2_norm");
    double acc = 0.0;
    for (const auto& v : F.values) acc += std::norm(v);
    return std::sqrt(acc * detail::freq_cell_weight(F.grid));
}

// ||grad u||_2^2 via the multiplier i*xi on the measure-weighted spectrum.
inline double gradient_sq_from_spectrum(const ComplexField& F) {
    require_domain(F, Domain::spectral, "gradient_sq_from_spectrum");
    const SpatialGrid& g = F.grid;
    const int n = g.n;
    std::vector<double> xi2(n);
    for (int k = 0; k < n; ++k) xi2[k] = g.freq(k) * g.freq(k);
    const std::size_t un = static_cast<std::size_t>(n);
    const std::size_t rows = F.values.size() / un;
    double acc = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double prefix = 0.0;
        for (std::size_t rest = r; rest != 0; rest /= un) prefix += xi2[rest % un];
        const cplx* row = F.values.data() + r * un;
        for (std::size_t j = 0; j < un; ++j) acc += (prefix + xi2[j]) * std::norm(row[j]);
    }
    return acc * detail::freq_cell_weight(g);
}

inline double h1_norm_from_spectrum(const ComplexField& F) {
    const double l2 = spectral_l2_norm(F);
    return std::sqrt(l2 * l2 + gradient_sq_from_spectrum(F));
}

inline double h1_norm(const ComplexField& u) {
    if (u.domain == Domain::spectral) return h1_norm_from_spectrum(u);
    return h1_norm_from_spectrum(to_spectrum(u));
}

inline double h1_norm(const RealField& v) {
    ComplexField c{v.grid, Domain::physical, std::vector<cplx>(v.values.size())};
    for (std::size_t i = 0; i < v.values.size(); ++i) c.values[i] = v.values[i];
    return h1_norm(c);
}

// || |x| f ||_{L2}. The moment is meaningless once the mass sits on the box
// edge; edge_dominated reports whether the outer 10% shell holds more than
// 1e-6 of the total mass.
inline double moment_norm(const ComplexField& f, bool* edge_dominated = nullptr) {
    require_domain(f, Domain::physical, "moment_norm");
    const SpatialGrid& g = f.grid;
    const int n = g.n;
    std::vector<double> x2(n), edge(n, 0.0);
    const double shell_n = 0.1 * n;
    for (int j = 0; j < n; ++j) {
        x2[j] = g.coord(j) * g.coord(j);
        if (j < shell_n || j >= n - shell_n) edge[j] = 1.0;
    }
    const std::size_t un = static_cast<std::size_t>(n);
    const std::size_t rows = f.values.size() / un;
    double acc = 0.0, total = 0.0, edged = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double prefix = 0.0;
        bool prefix_edge = false;
        for (std::size_t rest = r; rest != 0; rest /= un) {
            prefix += x2[rest % un];
            prefix_edge = prefix_edge || edge[rest % un] != 0.0;
        }
        const cplx* row = f.values.data() + r * un;
        for (std::size_t j = 0; j < un; ++j) {
            const double m = std::norm(row[j]);
            acc += (prefix + x2[j]) * m;
            total += m;
            if (prefix_edge || edge[j] != 0.0) edged += m;
        }
    }
    if (edge_dominated) *edge_dominated = total > 0.0 && edged > 1e-6 * total;
    return std::sqrt(acc * detail::cell_volume(g));
}

} // namespace sdsim
