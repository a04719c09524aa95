#pragma once

// Theorem-facing observables. Central objects:
//   profile f(t) = S(-t)u(t), stored via its Fourier transform f_hat;
//   Gamma = x + it grad, evaluated through the commuting representation
//     Gamma u = S(t)[x (S(-t)u)], so ||Gamma u||_2 = ||x f||_2;
//   the phase correction
//     Psi(xi,t) = int_1^t int_1^s e^{-(s-s')}/(2s') |f_hat((s/s')xi, s')|^2 ds' ds
//   accumulated incrementally: outer integral by trapezoid over supplied
//   snapshots, inner integral by trapezoid over a ring buffer windowed to
//   [s-W, s] (the e^{-(s-s')} kernel makes the tail below s-W smaller than
//   e^{-W}), with the frequency stretch (s/s')xi evaluated by multilinear
//   interpolation of |f_hat|^2, zero-extended beyond the lattice.

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "norms.hpp"
#include "spectral.hpp"

namespace sdsim {

struct ProfileSnapshot {
    double t = 0.0;
    ComplexField f_hat; // spectral domain
};

// f(t) = S(-t)u(t), returned through its transform.
inline ProfileSnapshot profile(const ComplexField& u, double t) {
    if (!(t >= 0.0)) throw DiagnosticsError("profile: t must be >= 0");
    return ProfileSnapshot{t, to_spectrum(free_propagate(u, -t))};
}

// L^2 distance of two profiles; equals ||u(t) - S(t)f(t')||_2 by unitarity.
inline double scattering_residual(const ProfileSnapshot& a, const ProfileSnapshot& b) {
    require_same_grid(a.f_hat.grid, b.f_hat.grid, "scattering_residual");
    ComplexField d = a.f_hat;
    for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] -= b.f_hat.values[i];
    return spectral_l2_norm(d);
}

// ||Gamma u||_2 via the profile moment; the alternate chirp identity
// Gamma u = it e^{i|x|^2/2t} grad(e^{-i|x|^2/2t} u) is kept as a test oracle.
inline double gamma_norm(const ComplexField& u, double t, bool* edge_dominated = nullptr) {
    if (!(t >= 0.0)) throw DiagnosticsError("gamma_norm: t must be >= 0");
    return moment_norm(free_propagate(u, -t), edge_dominated);
}

// Fraction of ||u||_2^2 carried by points within shell*L of the box boundary
// along any axis.
inline double boundary_mass_fraction(const ComplexField& u, double shell) {
    require_domain(u, Domain::physical, "boundary_mass_fraction");
    if (!(shell > 0.0) || !(shell < 0.5))
        throw DiagnosticsError("boundary_mass_fraction: shell must be in (0, 0.5)");
    const SpatialGrid& g = u.grid;
    const double lo = shell * g.n; // index bands [0, lo) and [n - lo, n)
    double total = 0.0, edge = 0.0;
    for (std::size_t f = 0; f < u.values.size(); ++f) {
        const double e = std::norm(u.values[f]);
        total += e;
        auto idx = g.unravel(f);
        for (int a = 0; a < g.dim; ++a) {
            if (idx[a] < lo || idx[a] >= g.n - lo) {
                edge += e;
                break;
            }
        }
    }
    return total > 0.0 ? edge / total : 0.0;
}

struct NormSeries {
    std::vector<double> times;
    std::vector<double> p_list; // exponents behind lp_u's columns
    std::vector<double> l2_u, h1_u, linf_u;
    std::vector<std::vector<double>> lp_u; // aligned with p_list
    std::vector<double> l2_v, h1_v;
    std::vector<double> xnorm_f, gamma_l2; // ||xf||_2 and ||Gamma u||_2 (equal by unitarity)
    std::vector<double> boundary_frac;
};

struct RecordOptions {
    std::vector<double> p_list;
    double shell = 0.1;
    bool profile_moment = true; // the xf / Gamma channels cost two transforms
};

inline NormSeries make_norm_series(const RecordOptions& opts) {
    NormSeries s;
    s.p_list = opts.p_list;
    s.lp_u.resize(opts.p_list.size());
    return s;
}

// Appends one row of channels. Channel layout must match the options the
// series was built with.
inline void record(NormSeries& series, const ComplexField& u, const RealField& v, double t,
                   const RecordOptions& opts) {
    series.times.push_back(t);
    series.l2_u.push_back(lp_norm(u, 2.0));
    series.linf_u.push_back(lp_norm(u, std::numeric_limits<double>::infinity()));
    for (std::size_t i = 0; i < opts.p_list.size(); ++i)
        series.lp_u[i].push_back(lp_norm(u, opts.p_list[i]));
    series.h1_u.push_back(h1_norm(u));
    // v channels: complexify for the shared spectral H^1 path.
    ComplexField vc = make_complex_field(u.grid);
    for (std::size_t i = 0; i < vc.values.size(); ++i) vc.values[i] = v.values[i];
    series.l2_v.push_back(lp_norm(vc, 2.0));
    series.h1_v.push_back(h1_norm(vc));
    if (opts.profile_moment) {
        const double m = moment_norm(free_propagate(u, -t));
        series.xnorm_f.push_back(m);
        series.gamma_l2.push_back(m);
    }
    series.boundary_frac.push_back(boundary_mass_fraction(u, opts.shell));
}

// First recorded time at which the boundary-mass monitor exceeds the
// threshold; decay windows must end before it.
inline std::optional<double> wrap_guard_time(const NormSeries& series, double threshold = 1e-6) {
    for (std::size_t i = 0; i < series.times.size(); ++i)
        if (series.boundary_frac[i] > threshold) return series.times[i];
    return std::nullopt;
}

namespace detail {

inline const std::vector<double>& lp_channel(const NormSeries& series, double r) {
    if (r == 2.0) return series.l2_u;
    if (std::isinf(r)) return series.linf_u;
    for (std::size_t i = 0; i < series.p_list.size(); ++i)
        if (std::abs(series.p_list[i] - r) < 1e-12) return series.lp_u[i];
    throw DiagnosticsError("no recorded norm channel for p=" + std::to_string(r));
}

} // namespace detail

// Mixed-norm ||u||_{L^q_t L^r_x} over the recorded channel, trapezoid in
// time; q = infinity gives the running maximum.
inline double strichartz_norm(const NormSeries& series, double q, double r,
                              std::pair<double, double> t_range) {
    const std::vector<double>& ch = detail::lp_channel(series, r);
    if (ch.size() != series.times.size())
        throw DiagnosticsError("strichartz_norm: channel not recorded");
    std::vector<double> ts, vals;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        if (series.times[i] < t_range.first - 1e-12 || series.times[i] > t_range.second + 1e-12)
            continue;
        ts.push_back(series.times[i]);
        vals.push_back(ch[i]);
    }
    if (ts.empty()) throw DiagnosticsError("strichartz_norm: empty time range");
    if (std::isinf(q)) return *std::max_element(vals.begin(), vals.end());
    if (!(q > 0.0)) throw DiagnosticsError("strichartz_norm: q must be positive");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < ts.size(); ++i)
        acc += 0.5 * (ts[i + 1] - ts[i]) *
               (std::pow(vals[i], q) + std::pow(vals[i + 1], q));
    return std::pow(acc, 1.0 / q);
}

// ||u||_{Y_T} = sup t^{1/2}||u||_inf + sup t^{-a}||u||_{H^1} + sup t^{-a}||xf||_2
//            + sup ||u||_2, over the recorded series (data rebased at t=1).
inline double y_norm(const NormSeries& series, double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0 / 6.0))
        throw DiagnosticsError("y_norm: alpha must be in (0, 1/6)");
    if (series.times.empty()) return 0.0;
    if (series.times.front() < 1.0)
        throw DiagnosticsError("y_norm: series must start at t >= 1");
    if (series.xnorm_f.size() != series.times.size())
        throw DiagnosticsError("y_norm: xf channel not recorded");
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const double t = series.times[i];
        a = std::max(a, std::sqrt(t) * series.linf_u[i]);
        b = std::max(b, std::pow(t, -alpha) * series.h1_u[i]);
        c = std::max(c, std::pow(t, -alpha) * series.xnorm_f[i]);
        d = std::max(d, series.l2_u[i]);
    }
    return a + b + c + d;
}

// ---------------------------------------------------------------------------
// Phase correction Psi.

namespace detail {

// Multilinear interpolation of a natural-order lattice array at the signed
// index position pos (per axis), zero-extended beyond [-n/2, n/2-1].
inline double interp_lattice(const SpatialGrid& g, const std::vector<double>& m2,
                             const std::array<double, 4>& pos) {
    const int n = g.n;
    int base[4];
    double frac[4];
    for (int a = 0; a < g.dim; ++a) {
        const double p = pos[a];
        base[a] = static_cast<int>(std::floor(p));
        frac[a] = p - base[a];
    }
    double acc = 0.0;
    const int corners = 1 << g.dim;
    for (int c = 0; c < corners; ++c) {
        double w = 1.0;
        std::size_t flat = 0;
        bool inside = true;
        for (int a = 0; a < g.dim; ++a) {
            const int bit = (c >> a) & 1;
            const int s = base[a] + bit;
            w *= bit ? frac[a] : 1.0 - frac[a];
            if (s < -n / 2 || s >= n / 2) {
                inside = false;
                break;
            }
            flat = flat * static_cast<std::size_t>(n) +
                   static_cast<std::size_t>(s < 0 ? s + n : s);
        }
        if (inside && w != 0.0) acc += w * m2[flat];
    }
    return acc;
}

} // namespace detail

struct PhaseAccumulator {
    SpatialGrid grid;
    double window = 40.0;       // W: inner-integral truncation span
    double ds_max = 0.25;       // maximum allowed snapshot spacing
    double band_fraction = 1.0; // accumulate only on |signed index| <= fraction * n/2
    double last_s = -1.0;       // most recent snapshot time; < 0 before the first
    std::vector<double> psi;    // natural order; zero outside the band
    std::vector<char> band;     // accumulation mask
    std::deque<std::pair<double, std::vector<double>>> buffer; // (s', |f_hat(s')|^2)
    std::vector<double> inner_prev; // I(xi, last_s), the outer trapezoid's left value
};

inline PhaseAccumulator make_phase_accumulator(const SpatialGrid& g, double window = 40.0,
                                               double ds_max = 0.25, double band_fraction = 1.0) {
    if (!(window > 0.0)) throw DiagnosticsError("phase accumulator: window must be > 0");
    if (!(ds_max > 0.0)) throw DiagnosticsError("phase accumulator: ds_max must be > 0");
    if (band_fraction < 0.0 || band_fraction > 1.0)
        throw DiagnosticsError("phase accumulator: band_fraction must be in [0, 1]");
    PhaseAccumulator acc;
    acc.grid = g;
    acc.window = window;
    acc.ds_max = ds_max;
    acc.band_fraction = band_fraction;
    acc.psi.assign(g.point_count(), 0.0);
    acc.inner_prev.assign(g.point_count(), 0.0);
    acc.band.assign(g.point_count(), 1);
    const double cutoff = band_fraction * (g.n / 2);
    for (std::size_t f = 0; f < acc.band.size(); ++f) {
        auto idx = g.unravel(f);
        for (int a = 0; a < g.dim; ++a)
            if (std::abs(g.signed_index(idx[a])) > cutoff) {
                acc.band[f] = 0;
                break;
            }
    }
    return acc;
}

namespace detail {

// Inner integral I(xi, s) by composite trapezoid over the buffered nodes.
inline std::vector<double> phase_inner_integral(const PhaseAccumulator& acc, double s) {
    const SpatialGrid& g = acc.grid;
    std::vector<double> inner(g.point_count(), 0.0);
    const std::size_t m = acc.buffer.size();
    if (m < 2) return inner;
    for (std::size_t j = 0; j < m; ++j) {
        const double sp = acc.buffer[j].first;
        const double left = j == 0 ? sp : acc.buffer[j - 1].first;
        const double right = j + 1 == m ? sp : acc.buffer[j + 1].first;
        const double weight = 0.5 * (right - left) * std::exp(-(s - sp)) / (2.0 * sp);
        if (weight == 0.0) continue;
        const double stretch = s / sp;
        const std::vector<double>& m2 = acc.buffer[j].second;
        std::array<double, 4> pos{};
        for (std::size_t f = 0; f < inner.size(); ++f) {
            if (!acc.band[f]) continue;
            auto idx = g.unravel(f);
            for (int a = 0; a < g.dim; ++a) pos[a] = stretch * g.signed_index(idx[a]);
            inner[f] += weight * interp_lattice(g, m2, pos);
        }
    }
    return inner;
}

} // namespace detail

// Advances Psi to the snapshot's time. Snapshots must arrive in increasing
// time order, spaced at most ds_max apart, starting at t >= 1.
inline void phase_update(PhaseAccumulator& acc, const ProfileSnapshot& snap) {
    require_same_grid(acc.grid, snap.f_hat.grid, "phase_update");
    require_domain(snap.f_hat, Domain::spectral, "phase_update");
    const double s = snap.t;
    if (acc.last_s < 0.0) {
        if (s < 1.0) throw DiagnosticsError("phase_update: accumulation starts at t >= 1");
    } else {
        if (!(s > acc.last_s)) throw DiagnosticsError("phase_update: out-of-order snapshot");
        if (s - acc.last_s > acc.ds_max * (1.0 + 1e-9))
            throw DiagnosticsError("phase_update: snapshot spacing exceeds ds_max");
    }

    std::vector<double> m2(snap.f_hat.values.size());
    for (std::size_t i = 0; i < m2.size(); ++i) m2[i] = std::norm(snap.f_hat.values[i]);
    acc.buffer.emplace_back(s, std::move(m2));
    while (!acc.buffer.empty() && acc.buffer.front().first < s - acc.window)
        acc.buffer.pop_front();

    std::vector<double> inner = detail::phase_inner_integral(acc, s);
    if (acc.last_s >= 0.0) {
        const double half = 0.5 * (s - acc.last_s);
        for (std::size_t f = 0; f < acc.psi.size(); ++f)
            acc.psi[f] += half * (acc.inner_prev[f] + inner[f]);
    }
    acc.inner_prev = std::move(inner);
    acc.last_s = s;
}

// e^{i Psi} applied to the profile's transform.
inline ComplexField modified_profile(const ProfileSnapshot& snap, const PhaseAccumulator& acc) {
    require_same_grid(acc.grid, snap.f_hat.grid, "modified_profile");
    if (std::abs(snap.t - acc.last_s) > acc.ds_max)
        throw DiagnosticsError("modified_profile: snapshot time does not match the accumulator");
    ComplexField out = snap.f_hat;
    for (std::size_t f = 0; f < out.values.size(); ++f)
        out.values[f] *= std::polar(1.0, acc.psi[f]);
    return out;
}

// Psi sampled over time at a fixed set of lattice indices, for the
// log-coefficient fit.
struct PhaseHistory {
    std::vector<std::size_t> band; // flat lattice indices tracked
    std::vector<double> times;
    std::vector<std::vector<double>> psi; // one row per time, aligned with band
};

inline void record_phase(PhaseHistory& history, const PhaseAccumulator& acc) {
    if (acc.last_s < 0.0) throw DiagnosticsError("record_phase: accumulator is empty");
    history.times.push_back(acc.last_s);
    std::vector<double> row(history.band.size());
    for (std::size_t i = 0; i < history.band.size(); ++i) row[i] = acc.psi[history.band[i]];
    history.psi.push_back(std::move(row));
}

// Restricts a history to the frequencies carrying at least rel_threshold of
// the peak profile mass, so ratio fits divide by well-conditioned |f_hat|^2.
inline PhaseHistory select_energetic_band(const PhaseHistory& history,
                                          const std::vector<double>& m2, double rel_threshold) {
    if (!(rel_threshold > 0.0) || !(rel_threshold < 1.0))
        throw DiagnosticsError("select_energetic_band: threshold must be in (0, 1)");
    double peak = 0.0;
    for (std::size_t f : history.band) peak = std::max(peak, m2.at(f));
    if (!(peak > 0.0)) throw DiagnosticsError("select_energetic_band: profile vanishes on band");
    PhaseHistory out;
    out.times = history.times;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < history.band.size(); ++i)
        if (m2[history.band[i]] >= rel_threshold * peak) {
            out.band.push_back(history.band[i]);
            keep.push_back(i);
        }
    out.psi.reserve(history.psi.size());
    for (const auto& row : history.psi) {
        std::vector<double> sub(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) sub[i] = row[keep[i]];
        out.psi.push_back(std::move(sub));
    }
    return out;
}

// Least-squares slope of Psi against log t per tracked frequency, each
// normalized by |f_hat(xi, t_last)|^2, band-averaged. The constant-profile
// double integral gives slope/|f_hat|^2 -> 1/2 for large t.
inline double log_phase_fit(const PhaseHistory& history, const std::vector<double>& m2_last) {
    if (history.times.size() < 10)
        throw FitError("log_phase_fit: need at least 10 sample times");
    if (history.times.back() < 10.0 * history.times.front())
        throw FitError("log_phase_fit: samples must span a decade");
    if (history.band.empty()) throw FitError("log_phase_fit: empty band");
    std::vector<double> logs(history.times.size());
    for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = std::log(history.times[i]);
    const double mean_x =
        std::accumulate(logs.begin(), logs.end(), 0.0) / static_cast<double>(logs.size());
    double sxx = 0.0;
    for (double x : logs) sxx += (x - mean_x) * (x - mean_x);

    double ratio_sum = 0.0;
    for (std::size_t b = 0; b < history.band.size(); ++b) {
        const double w = m2_last[history.band[b]];
        if (!(w > 0.0))
            throw FitError("log_phase_fit: vanishing profile weight inside the band");
        double mean_y = 0.0;
        for (std::size_t i = 0; i < history.times.size(); ++i) mean_y += history.psi[i][b];
        mean_y /= static_cast<double>(history.times.size());
        double sxy = 0.0;
        for (std::size_t i = 0; i < history.times.size(); ++i)
            sxy += (logs[i] - mean_x) * (history.psi[i][b] - mean_y);
        ratio_sum += (sxy / sxx) / w;
    }
    return ratio_sum / static_cast<double>(history.band.size());
}

} // namespace sdsim
