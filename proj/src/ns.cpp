#include "chaostats/ns.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "chaostats/fft.hpp"

namespace chaostats {

namespace {

void check_grid(const GridSpec& g) {
    if (g.dim != 2) throw std::invalid_argument("ns: grid must be two-dimensional");
}

void check_zero_mean(const SpectralField& w) {
    double scale = 0.0;
    for (const cplx& c : w.c) scale = std::max(scale, std::abs(c));
    if (std::abs(w.c[0]) > 1e-10 * std::max(1.0, scale))
        throw std::invalid_argument("ns: vorticity must have zero mean");
}

// -u.grad w, dealiased by the 2/3 rule, plus the forcing curl; mode (0,0)
// stays exactly zero. Pure advection+forcing (no viscous part).
SpectralField ns_advection_forcing(const SpectralField& w, const NsParams& p) {
    const GridSpec& g = w.grid;
    const int n = g.n, m = g.n / 2 + 1, nyq = g.nyquist();
    SpectralField wt = w;  // band-limit the product inputs, not just the product
    dealias_two_thirds(wt);
    SpectralField u(g), v(g), wx(g), wy(g);
    velocity_from_vorticity(wt, u, v);
    for (int i0 = 0; i0 < n; ++i0) {
        const double qx = g.q(g.wavenum(i0));
        const double qx_odd = i0 == nyq ? 0.0 : qx;  // odd derivative: no Nyquist
        for (int k1 = 0; k1 < m; ++k1) {
            const double qy_odd = k1 == nyq ? 0.0 : g.q(k1);
            const cplx c = wt.c[size_t(i0) * m + k1];
            wx.c[size_t(i0) * m + k1] = cplx(-qx_odd * c.imag(), qx_odd * c.real());
            wy.c[size_t(i0) * m + k1] = cplx(-qy_odd * c.imag(), qy_odd * c.real());
        }
    }
    RealField ur(g), vr(g), wxr(g), wyr(g);
    fft_c2r_2d(n, n, 1, u.c.data(), ur.v.data());
    fft_c2r_2d(n, n, 1, v.c.data(), vr.v.data());
    fft_c2r_2d(n, n, 1, wx.c.data(), wxr.v.data());
    fft_c2r_2d(n, n, 1, wy.c.data(), wyr.v.data());
    for (size_t j = 0; j < g.total(); ++j) ur.v[j] = ur.v[j] * wxr.v[j] + vr.v[j] * wyr.v[j];
    SpectralField out(g);
    fft_r2c_2d(n, n, 1, ur.v.data(), out.c.data());
    const double norm = -1.0 / double(g.total());  // minus sign of -u.grad w
    for (cplx& c : out.c) c *= norm;
    dealias_two_thirds(out);
    if (p.forcing_on) {
        const int a = p.forcing_wavenumber;
        if (a < 1 || a > nyq) throw std::invalid_argument("ns: bad forcing wavenumber");
        // curl of (sin(a y), 0) = -a cos(a y): -a/2 at modes (0, +-a)
        out.c[size_t(a)] += cplx(-0.5 * a, 0.0);
    }
    out.c[0] = cplx(0);
    return out;
}

void viscous_half(SpectralField& w, double dt, const NsParams& p) {
    const GridSpec& g = w.grid;
    const int n = g.n, m = g.n / 2 + 1;
    for (int i0 = 0; i0 < n; ++i0) {
        const double qx = g.q(g.wavenum(i0));
        for (int k1 = 0; k1 < m; ++k1) {
            const double qy = g.q(k1);
            w.c[size_t(i0) * m + k1] *= std::exp(-(qx * qx + qy * qy) * dt / (2.0 * p.re));
        }
    }
}

} // namespace

void velocity_from_vorticity(const SpectralField& w, SpectralField& u, SpectralField& v) {
    check_grid(w.grid);
    const GridSpec& g = w.grid;
    const int n = g.n, m = g.n / 2 + 1, nyq = g.nyquist();
    u = SpectralField(g);
    v = SpectralField(g);
    for (int i0 = 0; i0 < n; ++i0) {
        const int k0 = g.wavenum(i0);
        const double qx = g.q(k0);
        const double qx_odd = i0 == nyq ? 0.0 : qx;
        for (int k1 = 0; k1 < m; ++k1) {
            if (i0 == 0 && k1 == 0) continue;
            const double qy = g.q(k1);
            const double qy_odd = k1 == nyq ? 0.0 : qy;
            const cplx psi = w.c[size_t(i0) * m + k1] / (qx * qx + qy * qy);
            // u = i qy psi, v = -i qx psi
            u.c[size_t(i0) * m + k1] = cplx(-qy_odd * psi.imag(), qy_odd * psi.real());
            v.c[size_t(i0) * m + k1] = cplx(qx_odd * psi.imag(), -qx_odd * psi.real());
        }
    }
}

std::pair<RealField, RealField> velocity_from_vorticity(const RealField& w) {
    SpectralField ws = to_spectral(w);
    check_zero_mean(ws);
    SpectralField u, v;
    velocity_from_vorticity(ws, u, v);
    return {to_real(u), to_real(v)};
}

SpectralField ns_rhs(const SpectralField& w, const NsParams& p) {
    check_grid(w.grid);
    check_zero_mean(w);
    if (!(p.re > 0)) throw std::invalid_argument("ns: re must be positive");
    SpectralField out = ns_advection_forcing(w, p);
    const GridSpec& g = w.grid;
    const int n = g.n, m = g.n / 2 + 1;
    for (int i0 = 0; i0 < n; ++i0) {
        const double qx = g.q(g.wavenum(i0));
        for (int k1 = 0; k1 < m; ++k1) {
            const double qy = g.q(k1);
            out.c[size_t(i0) * m + k1] -= (qx * qx + qy * qy) / p.re * w.c[size_t(i0) * m + k1];
        }
    }
    out.c[0] = cplx(0);
    return out;
}

SpectralField ns_split_step(const SpectralField& w, double dt, const NsParams& p,
                            const NsExtraTerm& extra) {
    check_grid(w.grid);
    if (!(dt > 0)) throw std::invalid_argument("ns: dt must be positive");
    if (!(p.re > 0)) throw std::invalid_argument("ns: re must be positive");
    SpectralField z = w;
    viscous_half(z, dt, p);
    SpectralField g1 = ns_advection_forcing(z, p);
    if (extra) extra(z, g1);
    SpectralField z1 = z;
    for (size_t i = 0; i < z.c.size(); ++i) z1.c[i] += dt * g1.c[i];
    SpectralField g2 = ns_advection_forcing(z1, p);
    if (extra) extra(z1, g2);
    for (size_t i = 0; i < z.c.size(); ++i) z.c[i] += 0.5 * dt * (g1.c[i] + g2.c[i]);
    viscous_half(z, dt, p);
    return z;
}

double ns_max_speed(const SpectralField& w) {
    SpectralField u, v;
    velocity_from_vorticity(w, u, v);
    RealField ur(w.grid), vr(w.grid);
    fft_c2r_2d(w.grid.n, w.grid.n, 1, u.c.data(), ur.v.data());
    fft_c2r_2d(w.grid.n, w.grid.n, 1, v.c.data(), vr.v.data());
    double mx = 0;
    for (size_t j = 0; j < w.grid.total(); ++j)
        mx = std::max(mx, std::max(std::abs(ur.v[j]), std::abs(vr.v[j])));
    return mx;
}

Trajectory ns_integrate(const RealField& w0, const SolverConfig& cfg, const NsParams& p,
                        Provenance tag, const NsExtraTerm& extra) {
    check_grid(cfg.grid);
    if (w0.grid != cfg.grid) throw std::invalid_argument("ns_integrate: w0 grid differs from config grid");
    if (!(cfg.dt > 0) || !(cfg.t_end > 0)) throw std::invalid_argument("ns_integrate: dt and t_end must be positive");
    if (cfg.record_every < 1) throw std::invalid_argument("ns_integrate: record_every must be >= 1");
    if (!(cfg.cfl_number > 0) || cfg.cfl_number > 1)
        throw std::invalid_argument("ns_integrate: cfl_number must be in (0,1]");
    SpectralField z = to_spectral(w0);
    check_zero_mean(z);
    const double record_dt = cfg.dt * cfg.record_every;
    const int n_records = int(std::lround(cfg.t_end / record_dt));
    Trajectory traj;
    traj.grid = cfg.grid;
    traj.provenance = tag;
    traj.times.push_back(0.0);
    traj.states.push_back(w0);
    const double dx = cfg.grid.dx();
    for (int r = 1; r <= n_records; ++r) {
        const double t_next = r * record_dt;
        double t = (r - 1) * record_dt;
        while (t < t_next) {
            const double speed = ns_max_speed(z);
            double mw = 0;
            for (const cplx& c : z.c) mw = std::max(mw, std::abs(c));
            if (!(speed < 1e6) || !(mw < 1e6))
                throw std::runtime_error("NS blow-up: speed = " + std::to_string(speed) +
                                         " at t = " + std::to_string(t));
            const double dt_cfl = cfg.cfl_number * dx / std::max(speed, 1e-8);
            const double dt = std::min(dt_cfl, t_next - t);
            z = ns_split_step(z, dt, p, extra);
            t += dt;
            if (t_next - t < 1e-12 * t_next) t = t_next;  // absorb roundoff
        }
        traj.times.push_back(t_next);
        traj.states.push_back(to_real(z));
    }
    return traj;
}

SpectralField ns_random_ic(const GridSpec& grid, Rng& rng, int kmax, double amp) {
    check_grid(grid);
    if (kmax < 1 || kmax > grid.dealias_cutoff()) throw std::invalid_argument("ns_random_ic: bad kmax");
    SpectralField z(grid);
    for (int k0 = -kmax; k0 <= kmax; ++k0) {
        const int i0 = k0 >= 0 ? k0 : k0 + grid.n;
        for (int k1 = 0; k1 <= kmax; ++k1) {
            if (k1 == 0 && k0 <= 0) continue;  // k1=0 column holds both rows explicitly
            const cplx c = amp * cplx(rng.normal(), rng.normal());
            z.ref(i0, k1) = c;
            if (k1 == 0) z.ref(grid.n - k0, 0) = std::conj(c);
        }
    }
    return z;
}

} // namespace chaostats
