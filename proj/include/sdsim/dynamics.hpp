#pragma once

// Time integration. The coupled system
//   i u_t + (1/2) Lap u = u v,   mu v_t + v = lambda |u|^2
// splits into two EXACTLY solvable sub-flows:
//   A: the free Schrodinger group (spectral multiplier),
//   B: the pointwise potential/relaxation pair with |u| frozen. Since v is
//      real, the u-equation under B is a pure phase rotation, so both
//      components close pointwise in x:
//        v(h)     = E v0 + lambda (1 - E) |u0|^2,          E = e^{-h/mu}
//        Theta(h) = mu (1 - E) v0 + lambda |u0|^2 (h - mu (1 - E))
//        u(h)     = e^{-i Theta(h)} u0
// The Strang composition B(h/2) A(h) B(h/2) is then globally second order,
// with the only error coming from non-commutativity. Both sub-flows preserve
// the discrete L^2 norm of u, so mass is conserved to roundoff.

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "spectral.hpp"

namespace sdsim {

struct DebyeParams {
    double mu = 1.0;
    int lambda = 1;
};

inline void require_params(const DebyeParams& p, const char* where) {
    if (!(p.mu > 0.0)) throw ConfigError(std::string(where) + ": mu must be > 0");
    if (p.lambda != 1 && p.lambda != -1)
        throw ConfigError(std::string(where) + ": lambda must be -1 or 1");
}

struct SystemState {
    ComplexField u;
    RealField v;
    double t = 0.0;
};

struct StepConfig {
    double dt = 0.01;
    double t_end = 1.0;
    std::optional<double> filter_fraction{};
    int output_stride = 1;
};

// Exact flow of the potential/relaxation pair over time h, |u| frozen.
inline SystemState debye_potential_flow(const SystemState& state, double h,
                                        const DebyeParams& params) {
    require_params(params, "debye_potential_flow");
    if (!(h >= 0.0)) throw ConfigError("debye_potential_flow: h must be >= 0");
    require_same_grid(state.u.grid, state.v.grid, "debye_potential_flow");

    const double decay = std::exp(-h / params.mu);
    const double relax = params.mu * (1.0 - decay); // int_0^h e^{-s/mu} ds
    const double lam = static_cast<double>(params.lambda);

    SystemState out{state.u, state.v, state.t + h};
    const std::size_t total = state.u.values.size();
    for (std::size_t i = 0; i < total; ++i) {
        const double m2 = std::norm(state.u.values[i]);
        const double v0 = state.v.values[i];
        const double theta = relax * v0 + lam * m2 * (h - relax);
        out.u.values[i] *= std::polar(1.0, -theta);
        out.v.values[i] = decay * v0 + lam * (1.0 - decay) * m2;
    }
    return out;
}

// One Strang step B(h/2) A(h) B(h/2). The optional filter is applied inside
// the kinetic stage; tail_fraction, when requested, reports the share of
// spectral mass beyond two thirds of Nyquist (the divergence monitor's input),
// measured before any filtering.
inline SystemState strang_step(const SystemState& state, double h, const DebyeParams& params,
                               std::optional<double> filter_fraction = std::nullopt,
                               double* tail_fraction = nullptr) {
    if (!(h > 0.0)) throw ConfigError("strang_step: h must be > 0");
    SystemState mid = debye_potential_flow(state, 0.5 * h, params);
    mid.u = free_propagate(mid.u, h, filter_fraction, tail_fraction);
    SystemState out = debye_potential_flow(mid, 0.5 * h, params);
    out.t = state.t + h; // rebuild t in one operation: avoids half-step roundoff
    return out;
}

// One Strang step of the mu = 0 cubic NLS reference i u_t + (1/2) Lap u =
// lambda |u|^2 u, with the exact potential phase u <- e^{-i lambda |u|^2 tau} u.
inline ComplexField nls_step(const ComplexField& u, double h, int lambda,
                             std::optional<double> filter_fraction = std::nullopt) {
    if (!(h > 0.0)) throw ConfigError("nls_step: h must be > 0");
    if (lambda != 1 && lambda != -1) throw ConfigError("nls_step: lambda must be -1 or 1");
    ComplexField out = u;
    const double lam = static_cast<double>(lambda);
    for (cplx& z : out.values) z *= std::polar(1.0, -lam * std::norm(z) * 0.5 * h);
    out = free_propagate(out, h, filter_fraction);
    for (cplx& z : out.values) z *= std::polar(1.0, -lam * std::norm(z) * 0.5 * h);
    return out;
}

using Observer = std::function<void(const SystemState&)>;

struct EvolveOptions {
    // Verification mode: decouple the system (free u, source-free relaxation
    // of v). Used by the linear-flow diagnostics checks.
    bool linear = false;
    // Divergence monitor: abort when the spectral tail carries more than this
    // fraction of the mass (the solution has collapsed below grid resolution).
    double tail_alarm = 0.1;
};

namespace detail {

inline void require_finite(const SystemState& s, long step_index) {
    for (const cplx& z : s.u.values)
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
            throw DivergenceError(step_index, s.t);
    for (double x : s.v.values)
        if (!std::isfinite(x)) throw DivergenceError(step_index, s.t);
}

} // namespace detail

// Repeated Strang stepping from state.t to cfg.t_end, the final step
// shortened to land exactly on t_end. Observers run after every
// output_stride-th step and after the final one.
inline SystemState evolve(SystemState state, const StepConfig& cfg, const DebyeParams& params,
                          const std::vector<Observer>& observers, const EvolveOptions& opts = {}) {
    require_params(params, "evolve");
    if (!(cfg.dt > 0.0)) throw ConfigError("evolve: dt must be > 0");
    if (cfg.output_stride < 1) throw ConfigError("evolve: output_stride must be >= 1");
    if (!(cfg.t_end >= state.t)) throw ConfigError("evolve: t_end must be >= initial t");
    if (cfg.t_end == state.t) return state;

    const double t0 = state.t;
    const double span = cfg.t_end - t0;
    long total = static_cast<long>(std::ceil(span / cfg.dt - 1e-12));
    if (total < 1) total = 1;

    auto notify = [&](const SystemState& s) {
        try {
            for (const auto& obs : observers) obs(s);
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            throw Error("observer failed at t=" + std::to_string(s.t) + ": " + e.what());
        }
    };

    for (long k = 1; k <= total; ++k) {
        const double target = (k == total) ? cfg.t_end : t0 + static_cast<double>(k) * cfg.dt;
        const double h = target - state.t;
        double tail = 0.0;
        if (opts.linear) {
            state.u = free_propagate(state.u, h, cfg.filter_fraction, &tail);
            const double decay = std::exp(-h / params.mu);
            for (double& x : state.v.values) x *= decay;
            state.t = target;
        } else {
            state = strang_step(state, h, params, cfg.filter_fraction, &tail);
            state.t = target;
        }
        if (tail > opts.tail_alarm) throw DivergenceError(k, state.t);
        if ((k & 1023L) == 0) detail::require_finite(state, k);
        if (k % cfg.output_stride == 0 || k == total) notify(state);
    }
    detail::require_finite(state, total);
    return state;
}

// NLS reference trajectory used by the mu -> 0 sweep.
inline ComplexField evolve_nls(ComplexField u, double dt, double t_end, int lambda,
                               std::optional<double> filter_fraction = std::nullopt) {
    if (!(dt > 0.0)) throw ConfigError("evolve_nls: dt must be > 0");
    if (!(t_end >= 0.0)) throw ConfigError("evolve_nls: t_end must be >= 0");
    double t = 0.0;
    long total = static_cast<long>(std::ceil(t_end / dt - 1e-12));
    for (long k = 1; k <= total; ++k) {
        const double target = (k == total) ? t_end : static_cast<double>(k) * dt;
        u = nls_step(u, target - t, lambda, filter_fraction);
        t = target;
    }
    return u;
}

} // namespace sdsim
