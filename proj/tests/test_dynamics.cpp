#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <numbers>

#include "chaostats/galerkin.hpp"
#include "chaostats/ks.hpp"
#include "chaostats/ns.hpp"

using namespace chaostats;

namespace {

constexpr double pi = std::numbers::pi;

double max_diff(const RealField& a, const RealField& b) {
    double m = 0;
    for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

double max_abs(const RealField& a) {
    double m = 0;
    for (double x : a.v) m = std::max(m, std::abs(x));
    return m;
}

RealField taylor_green(const GridSpec& g, double scale) {
    RealField w(g);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) w.at(i, j) = scale * std::cos(g.x(i)) * std::cos(g.x(j));
    return w;
}

} // namespace

TEST_CASE("ks_rhs of the zero state is zero") {
    GridSpec g(1, 64, 6 * pi);
    SpectralField rhs = ks_rhs(SpectralField(g), KsParams{});
    for (auto& c : rhs.c) CHECK(std::abs(c) == 0.0);
}

TEST_CASE("ks_rhs of sin(x) at nu=1, L=2pi is -sin(x)cos(x)") {
    GridSpec g(1, 16, 2 * pi);  // n^4 linear symbol amplifies transform roundoff

    KsParams p{1.0, 2 * pi};
    RealField f(g);
    for (int j = 0; j < g.n; ++j) f.at(j) = std::sin(g.x(j));
    RealField rhs = to_real(ks_rhs(to_spectral(f), p));
    // linear part cancels at |k| = 1; remaining term -(u^2/2)_x = -0.5 sin(2x)
    for (int j = 0; j < g.n; ++j)
        CHECK(std::abs(rhs.at(j) + 0.5 * std::sin(2 * g.x(j))) < 1e-12);
}

TEST_CASE("ks_rhs matches the Galerkin mode ODE on a band-limited state") {
    GridSpec g(1, 32, 6 * pi);
    KsParams p;
    Rng rng(17);
    SpectralField z = ks_random_ic(g, rng, 8, 0.5);
    SpectralField fast = ks_rhs(z, p, 8);
    std::vector<cplx> slow = ks_galerkin_rhs(galerkin_from_field(z, 8), p, 8);
    for (int k = 0; k <= 8; ++k) CHECK(std::abs(fast.at(k) - slow[size_t(k + 8)]) < 1e-10);
    for (int k = 9; k <= g.nyquist(); ++k) CHECK(std::abs(fast.at(k)) == 0.0);
}

TEST_CASE("single-mode Galerkin convolution lands at k=2") {
    KsParams p;  // L = 6 pi: q_2 = 2/3
    std::vector<cplx> z(2 * 8 + 1, cplx(0));
    z[size_t(8 + 1)] = cplx(0.2, -0.4);
    z[size_t(8 - 1)] = std::conj(z[size_t(8 + 1)]);
    std::vector<cplx> rhs = ks_galerkin_rhs(z, p, 8);
    const double q2 = 2.0 * 2.0 * pi / p.length;
    cplx want_nl = -cplx(0, 0.5 * q2) * z[size_t(8 + 1)] * z[size_t(8 + 1)];
    const double q1 = 2.0 * pi / p.length;
    cplx want_lin = (q1 * q1 - p.nu * q1 * q1 * q1 * q1) * z[size_t(8 + 1)];
    CHECK(std::abs(rhs[size_t(8 + 2)] - want_nl) < 1e-14);
    CHECK(std::abs(rhs[size_t(8 + 1)] - want_lin) < 1e-14);
    CHECK(std::abs(rhs[size_t(8 + 3)]) == 0.0);
}

TEST_CASE("ETDRK4 keeps the zero state at exactly zero") {
    GridSpec g(1, 64, 6 * pi);
    KsEtdrk4 stepper(g, KsParams{}, 0.1);
    SpectralField z(g);
    stepper.step(z);
    for (auto& c : z.c) CHECK(std::abs(c) == 0.0);
}

TEST_CASE("ETDRK4 integrates the linear sub-problem exactly") {
    GridSpec g(1, 64, 6 * pi);
    KsParams p;
    const double dt = 0.05;
    KsEtdrk4 stepper(g, p, dt, /*cutoff=*/0);  // nonlinear term masked away
    Rng rng(3);
    SpectralField z = ks_random_ic(g, rng, 5, 1.0);
    SpectralField z0 = z;
    stepper.step(z);
    for (int k = 1; k <= 5; ++k) {
        const double q = g.q(k);
        const double factor = std::exp((q * q - p.nu * q * q * q * q) * dt);
        CHECK(std::abs(z.at(k) - z0.at(k) * factor) < 1e-12 * std::abs(z0.at(k) * factor));
    }
}

TEST_CASE("ETDRK4 global convergence order is at least 3.8") {
    GridSpec g(1, 128, 6 * pi);
    KsParams p;
    Rng rng(11);
    SpectralField z0 = ks_random_ic(g, rng, 4, 0.2);
    const double t_end = 0.1;
    RealField sol[3];
    const double dts[3] = {4e-3, 2e-3, 1e-3};
    for (int i = 0; i < 3; ++i) {
        KsEtdrk4 stepper(g, p, dts[i]);
        SpectralField z = z0;
        stepper.advance(z, int(std::lround(t_end / dts[i])));
        sol[i] = to_real(z);
    }
    const double e1 = max_diff(sol[0], sol[1]);
    const double e2 = max_diff(sol[1], sol[2]);
    REQUIRE(e2 > 1e-14);
    const double order = std::log2(e1 / e2);
    CHECK(order >= 3.8);
}

TEST_CASE("KS step halving at n=1024 agrees to 1e-6") {
    GridSpec g(1, 1024, 6 * pi);
    KsParams p;
    Rng rng(5);
    SpectralField z0 = ks_random_ic(g, rng, 8, 0.3);
    KsEtdrk4 fine(g, p, 1e-4), coarse(g, p, 2e-4);
    SpectralField a = z0, b = z0;
    fine.advance(a, 1000);
    coarse.advance(b, 500);
    CHECK(max_diff(to_real(a), to_real(b)) < 1e-6);
}

TEST_CASE("KS trajectory from zero stays zero") {
    GridSpec g(1, 64, 6 * pi);
    SolverConfig cfg{g, 1e-3, 0.5, 0.05, 10};
    Trajectory traj = ks_integrate(RealField(g), cfg, KsParams{});
    CHECK(traj.times.size() == 6);
    for (const auto& s : traj.states) CHECK(max_abs(s) == 0.0);
}

TEST_CASE("KS energy stays finite over a long attractor run") {
    GridSpec g(1, 256, 6 * pi);
    KsParams p;
    Rng rng(23);
    RealField u0 = to_real(ks_random_ic(g, rng, 8, 0.3));
    SolverConfig cfg{g, 5e-4, 0.5, 150.0, 25000};
    Trajectory traj = ks_integrate(u0, cfg, p);
    CHECK(traj.times.back() == doctest::Approx(150.0));
    for (size_t i = 0; i < traj.size(); ++i) {
        const double e = mean_square(traj.states[i]);
        CHECK(std::isfinite(e));
        CHECK(e < 1e4);
        if (traj.times[i] >= 20.0) CHECK(e > 1e-3);  // on the attractor, not decayed
    }
}

TEST_CASE("KS blow-up guard reports the failure time") {
    GridSpec g(1, 64, 6 * pi);
    Rng rng(9);
    RealField u0 = to_real(ks_random_ic(g, rng, 8, 1e7));
    SolverConfig cfg{g, 1e-3, 0.5, 1.0, 1};
    CHECK_THROWS_AS(ks_integrate(u0, cfg, KsParams{}), std::runtime_error);
}

TEST_CASE("spectral KS solver tracks the Galerkin oracle through time") {
    GridSpec g(1, 32, 6 * pi);
    KsParams p;
    Rng rng(41);
    SpectralField z0 = ks_random_ic(g, rng, 8, 0.3);
    const double dt = 2e-4;
    const int steps = 500;  // t = 0.1
    KsEtdrk4 stepper(g, p, dt, /*cutoff=*/8);
    SpectralField z = z0;
    stepper.advance(z, steps);
    std::vector<cplx> zg = ks_galerkin_integrate(galerkin_from_field(z0, 8), p, 8, dt, steps);
    for (int k = 0; k <= 8; ++k) CHECK(std::abs(z.at(k) - zg[size_t(k + 8)]) < 1e-8);
}

TEST_CASE("KS integration is deterministic") {
    GridSpec g(1, 128, 6 * pi);
    Rng rng(77);
    RealField u0 = to_real(ks_random_ic(g, rng, 8, 0.3));
    SolverConfig cfg{g, 1e-3, 0.5, 0.5, 100};
    Trajectory a = ks_integrate(u0, cfg, KsParams{});
    Trajectory b = ks_integrate(u0, cfg, KsParams{});
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(std::memcmp(a.states[i].v.data(), b.states[i].v.data(),
                          a.states[i].v.size() * sizeof(double)) == 0);
}

TEST_CASE("ns_rhs of zero vorticity with forcing off is zero") {
    GridSpec g(2, 32, 2 * pi);
    NsParams p;
    p.forcing_on = false;
    SpectralField rhs = ns_rhs(SpectralField(g), p);
    for (auto& c : rhs.c) CHECK(std::abs(c) == 0.0);
}

TEST_CASE("ns_rhs on Taylor-Green is pure viscous decay") {
    GridSpec g(2, 64, 2 * pi);
    NsParams p;
    p.forcing_on = false;
    RealField w = taylor_green(g, 2.0);
    RealField rhs = to_real(ns_rhs(to_spectral(w), p));
    RealField want = taylor_green(g, -4.0 / p.re);
    CHECK(max_diff(rhs, want) < 1e-10);
}

TEST_CASE("recovered velocity is divergence-free and inverts the curl") {
    GridSpec g(2, 64, 2 * pi);
    Rng rng(13);
    SpectralField w = ns_random_ic(g, rng, 5, 0.8);
    SpectralField u, v;
    velocity_from_vorticity(w, u, v);

    SpectralField div = spectral_derivative(u, 0, 1);
    SpectralField dv = spectral_derivative(v, 1, 1);
    for (size_t i = 0; i < div.c.size(); ++i) div.c[i] += dv.c[i];
    double dmax = 0;
    for (auto& c : div.c) dmax = std::max(dmax, std::abs(c));
    CHECK(dmax < 1e-12);

    SpectralField curl = spectral_derivative(v, 0, 1);
    SpectralField uy = spectral_derivative(u, 1, 1);
    for (size_t i = 0; i < curl.c.size(); ++i) curl.c[i] -= uy.c[i];
    double cmax = 0;
    for (size_t i = 0; i < curl.c.size(); ++i) cmax = std::max(cmax, std::abs(curl.c[i] - w.c[i]));
    CHECK(cmax < 1e-10);
}

TEST_CASE("velocity of the Taylor-Green vortex has the expected form") {
    GridSpec g(2, 64, 2 * pi);
    RealField w = taylor_green(g, 2.0);
    auto [u, v] = velocity_from_vorticity(w);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            CHECK(std::abs(u.at(i, j) + std::cos(g.x(i)) * std::sin(g.x(j))) < 1e-12);
            CHECK(std::abs(v.at(i, j) - std::sin(g.x(i)) * std::cos(g.x(j))) < 1e-12);
        }
}

TEST_CASE("velocity recovery rejects nonzero mean vorticity") {
    GridSpec g(2, 32, 2 * pi);
    RealField w(g);
    for (double& x : w.v) x = 1.0;
    CHECK_THROWS_AS(velocity_from_vorticity(w), std::invalid_argument);
}

TEST_CASE("NS split step keeps zero at zero without forcing") {
    GridSpec g(2, 32, 2 * pi);
    NsParams p;
    p.forcing_on = false;
    SpectralField w = ns_split_step(SpectralField(g), 0.01, p);
    for (auto& c : w.c) CHECK(std::abs(c) == 0.0);
}

TEST_CASE("Taylor-Green decay is reproduced to 1e-6 at t=1") {
    GridSpec g(2, 64, 2 * pi);
    NsParams p;
    p.forcing_on = false;
    SolverConfig cfg{g, 0.25, 0.5, 1.0, 1};
    Trajectory traj = ns_integrate(taylor_green(g, 2.0), cfg, p);
    RealField want = taylor_green(g, 2.0 * std::exp(-2.0 / p.re));
    CHECK(max_diff(traj.states.back(), want) < 1e-6);
}

TEST_CASE("NS split-step convergence order is at least 1.8") {
    GridSpec g(2, 64, 2 * pi);
    NsParams p;
    Rng rng(19);
    SpectralField w0 = ns_random_ic(g, rng, 4, 1.0);
    const double t_end = 0.2;
    RealField sol[3];
    const double dts[3] = {4e-3, 2e-3, 1e-3};
    for (int i = 0; i < 3; ++i) {
        SpectralField w = w0;
        const int steps = int(std::lround(t_end / dts[i]));
        for (int s = 0; s < steps; ++s) w = ns_split_step(w, dts[i], p);
        sol[i] = to_real(w);
    }
    const double e1 = max_diff(sol[0], sol[1]);
    const double e2 = max_diff(sol[1], sol[2]);
    REQUIRE(e2 > 1e-14);
    CHECK(std::log2(e1 / e2) >= 1.8);
}

TEST_CASE("forced NS run saturates without NaN") {
    GridSpec g(2, 128, 2 * pi);
    NsParams p;
    SolverConfig cfg{g, 0.05, 0.5, 100.0, 40};  // record every 2 time units
    Trajectory traj = ns_integrate(RealField(g), cfg, p);
    CHECK(traj.times.back() == doctest::Approx(100.0));
    double peak = 0;
    for (size_t i = 0; i < traj.size(); ++i) {
        const double e = mean_square(traj.states[i]);
        REQUIRE(std::isfinite(e));
        peak = std::max(peak, e);
    }
    CHECK(peak > 1.0);                                   // forcing spun the flow up
    CHECK(mean_square(traj.states.back()) < 1e5);        // and it saturated
    double mean = 0;
    for (double x : traj.states.back().v) mean += x;
    CHECK(std::abs(mean / double(g.total())) < 1e-8);    // zero-mean preserved
}

TEST_CASE("NS blow-up guard triggers on absurd initial data") {
    GridSpec g(2, 32, 2 * pi);
    Rng rng(29);
    RealField w0 = to_real(ns_random_ic(g, rng, 4, 1e8));
    SolverConfig cfg{g, 0.1, 0.5, 1.0, 1};
    CHECK_THROWS_AS(ns_integrate(w0, cfg, NsParams{}), std::runtime_error);
}

TEST_CASE("NS integration is deterministic") {
    GridSpec g(2, 64, 2 * pi);
    Rng rng(31);
    RealField w0 = to_real(ns_random_ic(g, rng, 4, 0.8));
    SolverConfig cfg{g, 0.1, 0.5, 0.5, 1};
    Trajectory a = ns_integrate(w0, cfg, NsParams{});
    Trajectory b = ns_integrate(w0, cfg, NsParams{});
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(std::memcmp(a.states[i].v.data(), b.states[i].v.data(),
                          a.states[i].v.size() * sizeof(double)) == 0);
}
