#pragma once

#include <complex>
#include <vector>

#include "grid.hpp"

namespace sdsim {

using cplx = std::complex<double>;

enum class Domain { physical, spectral };

struct ComplexField {
    SpatialGrid grid;
    Domain domain = Domain::physical;
    std::vector<cplx> values;
};

struct RealField {
    SpatialGrid grid;
    std::vector<double> values;
};

inline ComplexField make_complex_field(const SpatialGrid& g, Domain dom = Domain::physical) {
    return ComplexField{g, dom, std::vector<cplx>(g.point_count())};
}

inline RealField make_real_field(const SpatialGrid& g) {
    return RealField{g, std::vector<double>(g.point_count())};
}

inline void require_domain(const ComplexField& f, Domain dom, const char* where) {
    if (f.domain != dom)
        throw DomainError(std::string(where) + ": field is in the " +
                          (f.domain == Domain::physical ? "physical" : "spectral") +
                          " domain, expected " +
                          (dom == Domain::physical ? "physical" : "spectral"));
}

inline void require_same_grid(const SpatialGrid& a, const SpatialGrid& b, const char* where) {
    if (!(a == b)) throw GridError(std::string(where) + ": grid mismatch");
}

// Sample a pointwise function of the physical coordinates.
template <typename F>
ComplexField sample_field(const SpatialGrid& g, F&& fn) {
    ComplexField out = make_complex_field(g);
    const std::size_t total = g.point_count();
    std::array<double, 4> x{};
    for (std::size_t i = 0; i < total; ++i) {
        auto idx = g.unravel(i);
        for (int a = 0; a < g.dim; ++a) x[a] = g.coord(idx[a]);
        out.values[i] = fn(x);
    }
    return out;
}

template <typename F>
RealField sample_real_field(const SpatialGrid& g, F&& fn) {
    RealField out = make_real_field(g);
    const std::size_t total = g.point_count();
    std::array<double, 4> x{};
    for (std::size_t i = 0; i < total; ++i) {
        auto idx = g.unravel(i);
        for (int a = 0; a < g.dim; ++a) x[a] = g.coord(idx[a]);
        out.values[i] = fn(x);
    }
    return out;
}

} // namespace sdsim
