#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "sdsim/fft.hpp"
#include "sdsim/field.hpp"
#include "sdsim/grid.hpp"
#include "sdsim/norms.hpp"
#include "sdsim/spectral.hpp"

using namespace sdsim;
using oracles::cplx;

namespace {

ComplexField random_field(const SpatialGrid& g, unsigned seed) {
    auto f = make_complex_field(g, Domain::physical);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (auto& z : f.values) z = cplx(dist(rng), dist(rng));
    return f;
}

ComplexField gaussian_field(const SpatialGrid& g, double amplitude = 1.0, double shift = 0.0) {
    return sample_field(g, [&](const std::array<double, 4>& x) {
        double r2 = 0.0;
        for (int a = 0; a < g.dim; ++a) r2 += (x[a] - shift) * (x[a] - shift);
        return cplx(amplitude * std::exp(-r2 / 2.0), 0.0);
    });
}

double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("grid construction: accepted shapes and lattice layout", "[grid]") {
    auto g = make_grid(1, 8, 16.0);
    CHECK(g.dx() == Catch::Approx(2.0));
    CHECK(g.point_count() == 8);
    // Coordinates run from -L/2 with spacing dx; the right endpoint is open.
    CHECK(g.coord(0) == Catch::Approx(-8.0));
    CHECK(g.coord(7) == Catch::Approx(6.0));
    // Frequencies 2*pi*k/L for k in [-n/2, n/2), symmetric up to the single
    // Nyquist mode.
    CHECK(g.freq_spacing() == Catch::Approx(2.0 * M_PI / 16.0));
    CHECK(g.freq(0) == 0.0);
    CHECK(g.freq(4) == Catch::Approx(-M_PI / 2.0));
    for (int k = 1; k < 4; ++k) CHECK(g.freq(8 - k) == Catch::Approx(-g.freq(k)));
    CHECK(g.nyquist() == Catch::Approx(M_PI / 2.0));

    auto g2 = make_grid(2, 256, 64.0);
    CHECK(g2.point_count() == 65536);
    CHECK(g2.dx() == Catch::Approx(0.25));

    auto g4 = make_grid(4, 32, 16.0);
    CHECK(g4.point_count() == 1048576);

    // Sizes of the form 3 * 2^k are transform friendly and accepted.
    CHECK(make_grid(3, 96, 80.0).point_count() == 96 * 96 * 96);
    CHECK(make_grid(1, 48, 32.0).n == 48);
    CHECK(make_grid(1, 12, 8.0).n == 12);
}

TEST_CASE("grid construction: rejected shapes", "[grid]") {
    CHECK_THROWS_AS(make_grid(0, 64, 16.0), GridError);
    CHECK_THROWS_AS(make_grid(5, 64, 16.0), GridError);
    CHECK_THROWS_AS(make_grid(1, 17, 16.0), GridError);
    CHECK_THROWS_AS(make_grid(1, 100, 16.0), GridError);
    CHECK_THROWS_AS(make_grid(1, 6, 16.0), GridError);
    CHECK_THROWS_AS(make_grid(1, 0, 16.0), GridError);
    CHECK_THROWS_AS(make_grid(1, 64, 0.0), GridError);
    CHECK_THROWS_AS(make_grid(1, 64, -4.0), GridError);
    // 512^3 points blow past the default budget; the message names the limit.
    CHECK_THROWS_WITH(make_grid(3, 512, 10.0), Catch::Matchers::ContainsSubstring("budget"));
    // A raised budget admits the same grid.
    CHECK_NOTHROW(make_grid(3, 512, 10.0, std::size_t(1) << 28));
}

TEST_CASE("unravel inverts row-major flattening", "[grid]") {
    auto g = make_grid(3, 8, 16.0);
    std::size_t flat = 0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            for (int k = 0; k < 8; ++k, ++flat) {
                auto idx = g.unravel(flat);
                CHECK(idx[0] == i);
                CHECK(idx[1] == j);
                CHECK(idx[2] == k);
            }
}

TEST_CASE("forward transform matches the naive quadrature DFT", "[spectral]") {
    // Direct O(N^2) evaluation of hat(u)(xi_k) = sum_j u(x_j) e^{-i xi_k x_j} dx
    // pins the sign, measure, and half-box phase conventions all at once.
    SECTION("one dimension") {
        auto g = make_grid(1, 16, 8.0);
        auto u = random_field(g, 101);
        auto U = to_spectrum(u);
        for (int k = 0; k < g.n; ++k) {
            cplx acc = 0.0;
            for (int j = 0; j < g.n; ++j)
                acc += u.values[j] * std::exp(cplx(0.0, -g.freq(k) * g.coord(j)));
            acc *= g.dx();
            CHECK(std::abs(U.values[k] - acc) < 1e-12);
        }
    }
    SECTION("two dimensions") {
        auto g = make_grid(2, 8, 4.0);
        auto u = random_field(g, 202);
        auto U = to_spectrum(u);
        const double cell = g.dx() * g.dx();
        for (int k0 = 0; k0 < g.n; ++k0)
            for (int k1 = 0; k1 < g.n; ++k1) {
                cplx acc = 0.0;
                for (int j0 = 0; j0 < g.n; ++j0)
                    for (int j1 = 0; j1 < g.n; ++j1) {
                        const double phase =
                            g.freq(k0) * g.coord(j0) + g.freq(k1) * g.coord(j1);
                        acc += u.values[std::size_t(j0) * g.n + j1] * std::exp(cplx(0.0, -phase));
                    }
                acc *= cell;
                CHECK(std::abs(U.values[std::size_t(k0) * g.n + k1] - acc) < 1e-12);
            }
    }
}

TEST_CASE("constant field concentrates at the zero mode with weight c L^d", "[spectral]") {
    auto g = make_grid(1, 64, 16.0);
    auto u = make_complex_field(g, Domain::physical);
    std::fill(u.values.begin(), u.values.end(), cplx(0.75, 0.0));
    auto U = to_spectrum(u);
    CHECK(std::abs(U.values[0] - cplx(0.75 * 16.0, 0.0)) < 1e-12);
    for (int k = 1; k < g.n; ++k) CHECK(std::abs(U.values[k]) < 1e-12);

    auto g3 = make_grid(3, 8, 4.0);
    auto u3 = make_complex_field(g3, Domain::physical);
    std::fill(u3.values.begin(), u3.values.end(), cplx(2.0, 0.0));
    auto U3 = to_spectrum(u3);
    CHECK(std::abs(U3.values[0] - cplx(2.0 * 64.0, 0.0)) < 1e-12);
}

TEST_CASE("transform round trip is exact to near machine precision", "[spectral]") {
    const int sizes[4] = {64, 32, 8, 8};
    for (int d = 1; d <= 4; ++d) {
        auto g = make_grid(d, sizes[d - 1], 16.0);
        auto u = random_field(g, 300 + unsigned(d));
        auto back = from_spectrum(to_spectrum(u));
        double scale = 0.0;
        for (const auto& z : u.values) scale = std::max(scale, std::abs(z));
        CHECK(max_abs_diff(u.values, back.values) < 1e-12 * scale);
    }
}

TEST_CASE("domain discipline is enforced", "[spectral]") {
    auto g = make_grid(1, 16, 8.0);
    auto u = make_complex_field(g, Domain::physical);
    auto U = make_complex_field(g, Domain::spectral);
    CHECK_THROWS_AS(to_spectrum(U), DomainError);
    CHECK_THROWS_AS(from_spectrum(u), DomainError);
    CHECK_THROWS_AS(low_pass_filter(u, 0.5), DomainError);
}

TEST_CASE("Gaussian transform matches the closed form", "[spectral]") {
    // hat(e^{-x^2/2}) = sqrt(2 pi) e^{-xi^2/2} under this convention.
    auto g = make_grid(1, 512, 32.0);
    auto U = to_spectrum(gaussian_field(g));
    double worst = 0.0;
    for (int k = 0; k < g.n; ++k) {
        const double xi = g.freq(k);
        worst = std::max(worst,
                         std::abs(U.values[k] - cplx(std::sqrt(2.0 * M_PI) * std::exp(-xi * xi / 2.0), 0.0)));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("free propagator: identity, group law, isometry", "[spectral]") {
    auto g = make_grid(2, 64, 32.0);
    auto u = random_field(g, 404);

    auto id = free_propagate(u, 0.0);
    CHECK(max_abs_diff(u.values, id.values) < 1e-13);

    auto one = free_propagate(free_propagate(u, 0.3), 0.7);
    auto two = free_propagate(u, 1.0);
    CHECK(max_abs_diff(one.values, two.values) < 1e-12);

    CHECK(lp_norm(free_propagate(u, 2.5), 2.0) ==
          Catch::Approx(lp_norm(u, 2.0)).epsilon(1e-12));
}

TEST_CASE("free propagator reproduces the analytic Gaussian", "[spectral]") {
    SECTION("one dimension") {
        auto g = make_grid(1, 1024, 64.0);
        auto u0 = gaussian_field(g);
        for (double t : {0.5, 1.0, 2.0, 4.0}) {
            auto u = free_propagate(u0, t);
            double worst = 0.0;
            for (int j = 0; j < g.n; ++j) {
                const double x = g.coord(j);
                worst = std::max(worst, std::abs(u.values[j] - oracles::free_gaussian(1, t, x * x)));
            }
            CHECK(worst < 1e-8);
        }
        // Dispersive decay of the sup norm: |1+it|^{-1/2} at t=1 is 2^{-1/4}.
        CHECK(lp_norm(free_propagate(u0, 1.0), std::numeric_limits<double>::infinity()) ==
              Catch::Approx(std::pow(2.0, -0.25)).margin(1e-6));
    }
    SECTION("two dimensions") {
        auto g = make_grid(2, 256, 64.0);
        auto u0 = gaussian_field(g);
        auto u = free_propagate(u0, 2.0);
        double worst = 0.0;
        for (std::size_t f = 0; f < u.values.size(); ++f) {
            auto idx = g.unravel(f);
            const double x = g.coord(idx[0]), y = g.coord(idx[1]);
            worst = std::max(worst,
                             std::abs(u.values[f] - oracles::free_gaussian(2, 2.0, x * x + y * y)));
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("Lebesgue norms: closed forms and scaling", "[norms]") {
    auto g = make_grid(1, 64, 16.0);
    auto u = make_complex_field(g, Domain::physical);
    std::fill(u.values.begin(), u.values.end(), cplx(1.0, 0.0));
    CHECK(lp_norm(u, 2.0) == Catch::Approx(4.0).epsilon(1e-12));

    auto gg = make_grid(1, 512, 32.0);
    auto gauss = gaussian_field(gg);
    CHECK(lp_norm(gauss, std::numeric_limits<double>::infinity()) == Catch::Approx(1.0));
    CHECK(lp_norm(gauss, 2.0) == Catch::Approx(std::pow(M_PI, 0.25)).epsilon(1e-8));

    auto r = random_field(gg, 505);
    auto scaled = r;
    for (auto& z : scaled.values) z *= 3.7;
    for (double p : {1.0, 2.0, 4.0}) CHECK(lp_norm(scaled, p) == Catch::Approx(3.7 * lp_norm(r, p)).epsilon(1e-12));

    CHECK_THROWS_AS(lp_norm(r, 0.5), DomainError);
    auto spec = make_complex_field(gg, Domain::spectral);
    CHECK_THROWS_AS(lp_norm(spec, 2.0), DomainError);
}

TEST_CASE("Sobolev norm: closed form, lower bound, Parseval consistency", "[norms]") {
    auto g = make_grid(1, 512, 32.0);
    auto zero = make_complex_field(g, Domain::physical);
    CHECK(h1_norm(zero) == 0.0);

    // ||e^{-x^2/2}||_{H^1}^2 = sqrt(pi) + sqrt(pi)/2.
    CHECK(h1_norm(gaussian_field(g)) ==
          Catch::Approx(std::sqrt(1.5 * std::sqrt(M_PI))).epsilon(1e-8));

    // Modulation pushes mass to frequency k: ||e^{ikx} f||_{H^1} >= |k| ||f||_2 - ||f||_{H^1}.
    const double k = g.freq(40);
    auto mod = sample_field(g, [&](const std::array<double, 4>& x) {
        return std::exp(cplx(0.0, k * x[0])) * std::exp(-x[0] * x[0] / 2.0);
    });
    CHECK(h1_norm(mod) >= std::abs(k) * lp_norm(mod, 2.0) - h1_norm(gaussian_field(g)));

    // Physical-side and spectral-side L^2 agree (Parseval).
    auto g2 = make_grid(2, 64, 16.0);
    auto r = random_field(g2, 606);
    CHECK(spectral_l2_norm(to_spectrum(r)) == Catch::Approx(lp_norm(r, 2.0)).epsilon(1e-10));

    // Gradient evaluated through physical space agrees with the spectral sum.
    auto R = to_spectrum(r);
    double grad_phys_sq = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
        auto D = R;
        for (std::size_t f = 0; f < D.values.size(); ++f) {
            auto idx = g2.unravel(f);
            D.values[f] *= cplx(0.0, g2.freq(idx[axis]));
        }
        const double nrm = lp_norm(from_spectrum(D), 2.0);
        grad_phys_sq += nrm * nrm;
    }
    const double h1_spec = h1_norm(r);
    const double l2 = lp_norm(r, 2.0);
    CHECK(std::sqrt(l2 * l2 + grad_phys_sq) == Catch::Approx(h1_spec).epsilon(1e-10));
}

TEST_CASE("weighted moment norm: closed form, translation, edge detection", "[norms]") {
    auto g = make_grid(1, 512, 32.0);
    auto zero = make_complex_field(g, Domain::physical);
    CHECK(moment_norm(zero) == 0.0);

    // || x e^{-x^2/2} ||_2 = (sqrt(pi)/2)^{1/2}.
    CHECK(moment_norm(gaussian_field(g)) ==
          Catch::Approx(std::sqrt(std::sqrt(M_PI) / 2.0)).epsilon(1e-8));

    // Parallel axis: translating by a adds a^2 ||f||_2^2 to the square.
    const double a = 2.0;
    auto shifted = gaussian_field(g, 1.0, a);
    const double m0 = moment_norm(gaussian_field(g));
    const double l2 = lp_norm(gaussian_field(g), 2.0);
    CHECK(moment_norm(shifted) ==
          Catch::Approx(std::sqrt(m0 * m0 + a * a * l2 * l2)).epsilon(1e-8));

    bool edge = true;
    moment_norm(gaussian_field(g), &edge);
    CHECK_FALSE(edge);
    moment_norm(gaussian_field(g, 1.0, 14.5), &edge);
    CHECK(edge);
}

TEST_CASE("low-pass filter: identity, idempotence, exact retained energy", "[spectral]") {
    auto g = make_grid(2, 64, 16.0);
    auto U = to_spectrum(random_field(g, 707));

    auto full = low_pass_filter(U, 1.0);
    CHECK(max_abs_diff(U.values, full.values) == 0.0);

    auto once = low_pass_filter(U, 2.0 / 3.0);
    auto twice = low_pass_filter(once, 2.0 / 3.0);
    CHECK(max_abs_diff(once.values, twice.values) == 0.0);

    // Retained energy equals the spectral sum over surviving modes exactly.
    const int cutoff = int(std::floor((2.0 / 3.0) * (g.n / 2)));
    double kept = 0.0;
    for (std::size_t f = 0; f < U.values.size(); ++f) {
        auto idx = g.unravel(f);
        bool keep = true;
        for (int axis = 0; axis < g.dim; ++axis) {
            const int s = std::abs(g.signed_index(idx[axis]));
            if (s > cutoff) keep = false;
        }
        if (keep) kept += std::norm(U.values[f]);
    }
    double after = 0.0;
    for (const auto& z : once.values) after += std::norm(z);
    CHECK(after == Catch::Approx(kept).epsilon(1e-14));

    CHECK_THROWS_AS(low_pass_filter(U, 0.0), DomainError);
    CHECK_THROWS_AS(low_pass_filter(U, 1.5), DomainError);
}
