#include "chaostats/ks.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

#include "chaostats/fft.hpp"

namespace chaostats {

namespace {

int resolve_cutoff(const GridSpec& g, int cutoff) {
    if (cutoff < 0) return g.dealias_cutoff();
    if (cutoff > g.nyquist()) throw std::invalid_argument("ks: cutoff exceeds Nyquist");
    return cutoff;
}

void check_params(const GridSpec& g, const KsParams& p) {
    if (g.dim != 1) throw std::invalid_argument("ks: grid must be one-dimensional");
    if (!(p.nu > 0)) throw std::invalid_argument("ks: nu must be positive");
    if (!(p.length > 0)) throw std::invalid_argument("ks: length must be positive");
}

// N(z)_k = -(i q_k / 2) (u^2)_k restricted to k <= cutoff, u band-limited to
// cutoff before the product. Writes into out (may not alias z); u is scratch.
// Returns max |u(x)| over the grid.
double ks_nonlinear(const GridSpec& g, int cutoff, const SpectralField& z, SpectralField& out,
                    RealField& u) {
    const int m = g.n / 2 + 1;
    const int n = g.n;
    for (int k = 0; k < m; ++k) out.c[size_t(k)] = k <= cutoff ? z.c[size_t(k)] : cplx(0);
    fft_c2r_1d(n, 1, out.c.data(), u.v.data());
    double mx = 0;
    for (int j = 0; j < n; ++j) {
        const double v = u.v[size_t(j)];
        mx = std::max(mx, std::abs(v));
        u.v[size_t(j)] = v * v;
    }
    fft_r2c_1d(n, 1, u.v.data(), out.c.data());
    const double scale = 0.5 / n;  // 1/n product normalization and the 1/2
    for (int k = 0; k < m; ++k) {
        if (k <= cutoff && k < g.nyquist()) {
            const double q = g.q(k);
            const cplx s = out.c[size_t(k)] * scale;
            out.c[size_t(k)] = cplx(q * s.imag(), -q * s.real());  // -i q s
        } else {
            out.c[size_t(k)] = cplx(0);
        }
    }
    return mx;
}

// lam_k = q^2 - nu q^4
std::vector<double> linear_symbol(const GridSpec& g, const KsParams& p) {
    std::vector<double> lam(size_t(g.n / 2 + 1));
    for (int k = 0; k <= g.n / 2; ++k) {
        double q = g.q(k);
        lam[size_t(k)] = q * q - p.nu * q * q * q * q;
    }
    return lam;
}

} // namespace

EtdCoeffs::EtdCoeffs(const std::vector<double>& lam, double dt) {
    const size_t m = lam.size();
    E.resize(m); E2.resize(m); Q.resize(m); f1.resize(m); f2.resize(m); f3.resize(m);
    constexpr int M = 32;
    std::vector<cplx> ring(M);
    for (int j = 0; j < M; ++j) {
        double th = std::numbers::pi * (2.0 * j + 1.0) / M;
        ring[size_t(j)] = cplx(std::cos(th), std::sin(th));
    }
    for (size_t i = 0; i < m; ++i) {
        const double x = dt * lam[i];
        E[i] = std::exp(x);
        E2[i] = std::exp(0.5 * x);
        cplx q(0), a(0), b(0), c(0);
        for (int j = 0; j < M; ++j) {
            const cplx z = x + ring[size_t(j)];
            const cplx ez = std::exp(z);
            const cplx z2 = z * z, z3 = z2 * z;
            q += (std::exp(0.5 * z) - 1.0) / z;
            a += (-4.0 - z + ez * (4.0 - 3.0 * z + z2)) / z3;
            b += (2.0 + z + ez * (-2.0 + z)) / z3;
            c += (-4.0 - 3.0 * z - z2 + ez * (4.0 - z)) / z3;
        }
        Q[i] = dt * q.real() / M;
        f1[i] = dt * a.real() / M;
        f2[i] = dt * b.real() / M;
        f3[i] = dt * c.real() / M;
    }
}

KsEtdrk4::KsEtdrk4(const GridSpec& grid, const KsParams& params, double dt, int cutoff)
    : grid_(grid), params_(params), dt_(dt), cutoff_(resolve_cutoff(grid, cutoff)),
      nv_(grid), na_(grid), nb_(grid), nc_(grid), a_(grid), b_(grid), c_(grid), u_(grid) {
    check_params(grid, params);
    if (!(dt > 0)) throw std::invalid_argument("ks: dt must be positive");
    co_ = EtdCoeffs(linear_symbol(grid, params), dt);
}

void KsEtdrk4::nonlinear(const SpectralField& z, SpectralField& out) {
    last_max_abs_ = ks_nonlinear(grid_, cutoff_, z, out, u_);
    if (extra_) extra_(z, out);
}

void KsEtdrk4::step(SpectralField& z) {
    const size_t m = size_t(z.m());
    nonlinear(z, nv_);
    for (size_t k = 0; k < m; ++k) a_.c[k] = co_.E2[k] * z.c[k] + co_.Q[k] * nv_.c[k];
    nonlinear(a_, na_);
    for (size_t k = 0; k < m; ++k) b_.c[k] = co_.E2[k] * z.c[k] + co_.Q[k] * na_.c[k];
    nonlinear(b_, nb_);
    for (size_t k = 0; k < m; ++k)
        c_.c[k] = co_.E2[k] * a_.c[k] + co_.Q[k] * (2.0 * nb_.c[k] - nv_.c[k]);
    nonlinear(c_, nc_);
    for (size_t k = 0; k < m; ++k)
        z.c[k] = co_.E[k] * z.c[k] + co_.f1[k] * nv_.c[k] + 2.0 * co_.f2[k] * (na_.c[k] + nb_.c[k]) +
                 co_.f3[k] * nc_.c[k];
}

void KsEtdrk4::advance(SpectralField& z, int steps, double t0) {
    for (int s = 0; s < steps; ++s) {
        step(z);
        if (!(last_max_abs_ < 1e6))
            throw std::runtime_error("KS blow-up: max|u| = " + std::to_string(last_max_abs_) +
                                     " at t = " + std::to_string(t0 + (s + 1) * dt_) + " (step " +
                                     std::to_string(s + 1) + ")");
    }
}

SpectralField ks_rhs(const SpectralField& z, const KsParams& p, int cutoff) {
    check_params(z.grid, p);
    const int cut = resolve_cutoff(z.grid, cutoff);
    const GridSpec& g = z.grid;
    SpectralField out(g);
    RealField scratch(g);
    ks_nonlinear(g, cut, z, out, scratch);
    for (int k = 0; k <= g.nyquist(); ++k) {
        const double q = g.q(k);
        out.c[size_t(k)] += (q * q - p.nu * q * q * q * q) * z.c[size_t(k)];
    }
    return out;
}

SpectralField ks_etdrk4_step(const SpectralField& z, double dt, const KsParams& p, int cutoff) {
    KsEtdrk4 stepper(z.grid, p, dt, cutoff);
    SpectralField out = z;
    stepper.step(out);
    return out;
}

Trajectory ks_integrate(const RealField& u0, const SolverConfig& cfg, const KsParams& p,
                        int cutoff, Provenance tag, const KsEtdrk4::ExtraTerm& extra) {
    if (u0.grid != cfg.grid) throw std::invalid_argument("ks_integrate: u0 grid differs from config grid");
    if (!(cfg.dt > 0) || !(cfg.t_end > 0)) throw std::invalid_argument("ks_integrate: dt and t_end must be positive");
    if (cfg.record_every < 1) throw std::invalid_argument("ks_integrate: record_every must be >= 1");
    KsEtdrk4 stepper(cfg.grid, p, cfg.dt, cutoff);
    if (extra) stepper.set_extra_term(extra);
    SpectralField z = to_spectral(u0);
    const int steps = int(std::lround(cfg.t_end / cfg.dt));
    Trajectory traj;
    traj.grid = cfg.grid;
    traj.provenance = tag;
    traj.times.push_back(0.0);
    traj.states.push_back(u0);
    for (int i = 1; i <= steps; ++i) {
        stepper.step(z);
        if (!(stepper.last_max_abs() < 1e6))
            throw std::runtime_error("KS blow-up: max|u| = " + std::to_string(stepper.last_max_abs()) +
                                     " at t = " + std::to_string(i * cfg.dt));
        if (i % cfg.record_every == 0) {
            traj.times.push_back(i * cfg.dt);
            traj.states.push_back(to_real(z));
        }
    }
    return traj;
}

SpectralField ks_random_ic(const GridSpec& grid, Rng& rng, int kmax, double amp) {
    if (grid.dim != 1) throw std::invalid_argument("ks_random_ic: grid must be one-dimensional");
    if (kmax < 1 || kmax > grid.nyquist()) throw std::invalid_argument("ks_random_ic: bad kmax");
    SpectralField z(grid);
    for (int k = 1; k <= kmax; ++k) {
        double re = rng.normal(), im = rng.normal();
        z.ref(k) = amp * cplx(re, im);
    }
    return z;
}

} // namespace chaostats
