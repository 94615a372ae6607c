#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <numbers>

#include "chaostats/rng.hpp"
#include "chaostats/spectral.hpp"

using namespace chaostats;

namespace {

constexpr double pi = std::numbers::pi;

RealField random_field(const GridSpec& g, uint64_t seed) {
    Rng rng(seed);
    RealField f(g);
    for (double& x : f.v) x = rng.normal();
    return f;
}

double max_diff(const RealField& a, const RealField& b) {
    double m = 0;
    for (size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
    return m;
}

double dot(const RealField& a, const RealField& b) {
    double s = 0;
    for (size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
    return s;
}

} // namespace

TEST_CASE("forward transform of zero field is zero") {
    GridSpec g(1, 16, 2 * pi);
    SpectralField s = to_spectral(RealField(g));
    for (auto& c : s.c) CHECK(std::abs(c) == 0.0);
}

TEST_CASE("forward transform of sin(x) hits the +-1 modes only") {
    GridSpec g(1, 16, 2 * pi);
    RealField f(g);
    for (int j = 0; j < g.n; ++j) f.at(j) = std::sin(g.x(j));
    SpectralField s = to_spectral(f);
    CHECK(std::abs(s.at(1) - cplx(0, -0.5)) < 1e-14);
    CHECK(std::abs(s.at(-1) - cplx(0, 0.5)) < 1e-14);
    for (int k = 0; k <= g.nyquist(); ++k)
        if (k != 1) CHECK(std::abs(s.at(k)) < 1e-14);
}

TEST_CASE("transform round trip is the identity") {
    for (int dim : {1, 2}) {
        GridSpec g(dim, 32, dim == 1 ? 6 * pi : 2 * pi);
        RealField f = random_field(g, 7 + uint64_t(dim));
        RealField f2 = to_real(to_spectral(f));
        double scale = 0;
        for (double x : f.v) scale = std::max(scale, std::abs(x));
        CHECK(max_diff(f, f2) < 1e-12 * scale);
    }
}

TEST_CASE("forward transform rejects non-finite input") {
    GridSpec g(1, 16, 2 * pi);
    RealField f(g);
    f.at(3) = std::nan("");
    CHECK_THROWS_AS(to_spectral(f), std::invalid_argument);
}

TEST_CASE("inverse transform of the sin(x) coefficients recovers sin(x)") {
    GridSpec g(1, 16, 2 * pi);
    SpectralField s(g);
    s.ref(1) = cplx(0, -0.5);
    RealField f = to_real(s);
    for (int j = 0; j < g.n; ++j) CHECK(std::abs(f.at(j) - std::sin(g.x(j))) < 1e-14);
}

TEST_CASE("inverse transform rejects broken Hermitian symmetry") {
    GridSpec g1(1, 16, 2 * pi);
    SpectralField s1(g1);
    s1.ref(0) = cplx(0, 1.0);  // mean mode must be real
    CHECK_THROWS_AS(to_real(s1), std::invalid_argument);

    GridSpec g2(2, 16, 2 * pi);
    SpectralField s2(g2);
    s2.ref(3, 0) = cplx(1.0, 0.5);  // k1=0 column without its mirror
    CHECK_THROWS_AS(to_real(s2), std::invalid_argument);
}

TEST_CASE("spectral derivative: sin -> cos, constant -> zero, fourth order") {
    GridSpec g(1, 64, 2 * pi);
    RealField f(g), want(g);
    for (int j = 0; j < g.n; ++j) f.at(j) = std::sin(g.x(j));
    for (int j = 0; j < g.n; ++j) want.at(j) = std::cos(g.x(j));
    CHECK(max_diff(to_real(spectral_derivative(to_spectral(f), 0, 1)), want) < 1e-12);

    RealField c(g);
    for (double& x : c.v) x = 4.2;
    RealField dc = to_real(spectral_derivative(to_spectral(c), 0, 1));
    for (double x : dc.v) CHECK(std::abs(x) < 1e-13);

    // smaller grid: q^4 at the Nyquist amplifies transform roundoff
    GridSpec g16(1, 16, 2 * pi);
    RealField s2(g16), want4(g16);
    for (int j = 0; j < g16.n; ++j) s2.at(j) = std::sin(2 * g16.x(j));
    for (int j = 0; j < g16.n; ++j) want4.at(j) = 16.0 * std::sin(2 * g16.x(j));
    CHECK(max_diff(to_real(spectral_derivative(to_spectral(s2), 0, 4)), want4) < 1e-10);
}

TEST_CASE("spectral derivative along axis 1 on a 2D field") {
    GridSpec g(2, 32, 2 * pi);
    RealField f(g), want(g);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            f.at(i, j) = std::cos(4 * g.x(j));
            want.at(i, j) = -4.0 * std::sin(4 * g.x(j));
        }
    CHECK(max_diff(to_real(spectral_derivative(to_spectral(f), 1, 1)), want) < 1e-11);
}

TEST_CASE("odd-order derivative zeroes the Nyquist mode") {
    GridSpec g(1, 16, 2 * pi);
    SpectralField s(g);
    s.ref(g.nyquist()) = cplx(1.0, 0.0);
    SpectralField d = spectral_derivative(s, 0, 1);
    CHECK(std::abs(d.at(g.nyquist())) == 0.0);
    SpectralField d2 = spectral_derivative(s, 0, 2);
    CHECK(std::abs(d2.at(g.nyquist())) > 0.0);
}

TEST_CASE("two-thirds dealiasing") {
    GridSpec g(1, 16, 2 * pi);
    SpectralField band(g);
    band.ref(2) = cplx(1, 1);
    SpectralField b2 = band;
    dealias_two_thirds(b2);
    CHECK(std::abs(b2.at(2) - band.at(2)) == 0.0);  // |k| <= n/3 untouched

    SpectralField high(g);
    high.ref(7) = cplx(1, 0);  // k = n/2 - 1 > n/3
    dealias_two_thirds(high);
    for (auto& c : high.c) CHECK(std::abs(c) == 0.0);

    GridSpec g2(2, 32, 2 * pi);
    SpectralField r = to_spectral(random_field(g2, 11));
    SpectralField once = r;
    dealias_two_thirds(once);
    SpectralField twice = once;
    dealias_two_thirds(twice);
    CHECK(std::memcmp(once.c.data(), twice.c.data(), once.c.size() * sizeof(cplx)) == 0);
}

TEST_CASE("filter: band-limited fixed point, out-of-band kill, idempotence") {
    GridSpec g(1, 64, 6 * pi);
    FilterSpec spec(5, g);

    SpectralField inband(g);
    inband.ref(3) = cplx(0.3, -0.7);
    SpectralField pf = apply_filter(inband, spec);
    CHECK(std::abs(pf.at(3) - inband.at(3)) == 0.0);

    SpectralField outband(g);
    outband.ref(6) = cplx(1, 2);
    SpectralField po = apply_filter(outband, spec);
    for (auto& c : po.c) CHECK(std::abs(c) == 0.0);

    RealField f = random_field(g, 3);
    RealField once = apply_filter(f, spec);
    RealField twice = apply_filter(once, spec);
    CHECK(max_diff(once, twice) < 1e-13);
}

TEST_CASE("filter is self-adjoint and linear") {
    for (int dim : {1, 2}) {
        GridSpec g(dim, 32, 2 * pi);
        FilterSpec spec(7, g);
        RealField f = random_field(g, 21 + uint64_t(dim));
        RealField h = random_field(g, 22 + uint64_t(dim));
        double lhs = dot(apply_filter(f, spec), h);
        double rhs = dot(f, apply_filter(h, spec));
        CHECK(std::abs(lhs - rhs) < 1e-9 * (std::abs(lhs) + 1));

        RealField sum(g);
        for (size_t i = 0; i < sum.v.size(); ++i) sum.v[i] = 2.0 * f.v[i] - 3.0 * h.v[i];
        RealField left = apply_filter(sum, spec);
        RealField pf = apply_filter(f, spec), ph = apply_filter(h, spec);
        RealField right(g);
        for (size_t i = 0; i < right.v.size(); ++i) right.v[i] = 2.0 * pf.v[i] - 3.0 * ph.v[i];
        CHECK(max_diff(left, right) < 1e-12);
    }
}

TEST_CASE("filter onto a coarser grid keeps the retained coefficients") {
    GridSpec fine(1, 128, 6 * pi), coarse(1, 32, 6 * pi);
    SpectralField s = to_spectral(random_field(fine, 31));
    FilterSpec spec(10, coarse);
    SpectralField out = apply_filter(s, spec);
    for (int k = 0; k <= 10; ++k) CHECK(std::abs(out.at(k) - s.at(k)) < 1e-14);
    for (int k = 11; k <= coarse.nyquist(); ++k) CHECK(std::abs(out.at(k)) == 0.0);

    GridSpec fine2(2, 64, 2 * pi), coarse2(2, 16, 2 * pi);
    SpectralField s2 = to_spectral(random_field(fine2, 32));
    SpectralField out2 = apply_filter(s2, FilterSpec(5, coarse2));
    for (int k0 = -5; k0 <= 5; ++k0)
        for (int k1 = 0; k1 <= 5; ++k1)
            CHECK(std::abs(out2.at(k0, k1) - s2.at(k0, k1)) < 1e-14);
}

TEST_CASE("Parseval: spectral energy equals mean square") {
    for (int dim : {1, 2}) {
        GridSpec g(dim, 64, 6 * pi);
        RealField f = random_field(g, 5 + uint64_t(dim));
        double a = spectral_energy(to_spectral(f));
        double b = mean_square(f);
        CHECK(std::abs(a - b) < 1e-10 * b);
    }
}

TEST_CASE("resample: exact interpolation and round trip") {
    GridSpec g64(1, 64, 2 * pi), g128(1, 128, 2 * pi);
    RealField f(g64);
    for (int j = 0; j < 64; ++j) f.at(j) = std::sin(g64.x(j));
    RealField up = resample(f, g128);
    for (int j = 0; j < 128; ++j) CHECK(std::abs(up.at(j) - std::sin(g128.x(j))) < 1e-12);

    RealField c(g64);
    for (double& x : c.v) x = -1.5;
    RealField cup = resample(c, g128);
    for (double x : cup.v) CHECK(std::abs(x + 1.5) < 1e-13);

    for (int dim : {1, 2}) {
        GridSpec lo(dim, 16, 2 * pi), hi(dim, 32, 2 * pi);
        RealField r = random_field(lo, 40 + uint64_t(dim));  // full band incl. Nyquist
        RealField back = resample(resample(r, hi), lo);
        double scale = 0;
        for (double x : r.v) scale = std::max(scale, std::abs(x));
        CHECK(max_diff(r, back) < 1e-12 * scale);
    }
}

TEST_CASE("transforms are deterministic") {
    GridSpec g(2, 32, 2 * pi);
    RealField f = random_field(g, 99);
    SpectralField a = to_spectral(f), b = to_spectral(f);
    CHECK(std::memcmp(a.c.data(), b.c.data(), a.c.size() * sizeof(cplx)) == 0);
}
