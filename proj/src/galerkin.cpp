#include "chaostats/galerkin.hpp"

#include <algorithm>
#include <stdexcept>

namespace chaostats {

namespace {

void check_size(const std::vector<cplx>& z, int n_modes) {
    if (n_modes < 1) throw std::invalid_argument("galerkin: n_modes must be >= 1");
    if (z.size() != size_t(2 * n_modes + 1))
        throw std::invalid_argument("galerkin: mode vector must have 2*n_modes+1 entries");
}

} // namespace

std::vector<cplx> ks_galerkin_rhs(const std::vector<cplx>& z, const KsParams& p, int n_modes) {
    check_size(z, n_modes);
    if (!(p.nu > 0) || !(p.length > 0)) throw std::invalid_argument("galerkin: bad parameters");
    const int K = n_modes;
    const double two_pi_over_l = 2.0 * std::numbers::pi / p.length;
    std::vector<cplx> out(z.size(), cplx(0));
    for (int k = -K; k <= K; ++k) {
        const double q = two_pi_over_l * k;
        cplx conv(0);
        const int jlo = std::max(-K, k - K), jhi = std::min(K, k + K);
        for (int j = jlo; j <= jhi; ++j) conv += z[size_t(j + K)] * z[size_t(k - j + K)];
        const cplx lin = (q * q - p.nu * q * q * q * q) * z[size_t(k + K)];
        out[size_t(k + K)] = lin - cplx(0, 0.5 * q) * conv;
    }
    return out;
}

std::vector<cplx> ks_galerkin_integrate(std::vector<cplx> z, const KsParams& p, int n_modes,
                                        double dt, int steps) {
    check_size(z, n_modes);
    if (!(dt > 0)) throw std::invalid_argument("galerkin: dt must be positive");
    const size_t n = z.size();
    std::vector<cplx> k1, k2, k3, k4, tmp(n);
    for (int s = 0; s < steps; ++s) {
        k1 = ks_galerkin_rhs(z, p, n_modes);
        for (size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * dt * k1[i];
        k2 = ks_galerkin_rhs(tmp, p, n_modes);
        for (size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * dt * k2[i];
        k3 = ks_galerkin_rhs(tmp, p, n_modes);
        for (size_t i = 0; i < n; ++i) tmp[i] = z[i] + dt * k3[i];
        k4 = ks_galerkin_rhs(tmp, p, n_modes);
        for (size_t i = 0; i < n; ++i)
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return z;
}

std::vector<cplx> galerkin_from_field(const SpectralField& s, int n_modes) {
    if (s.grid.dim != 1) throw std::invalid_argument("galerkin: field must be one-dimensional");
    if (n_modes > s.grid.nyquist()) throw std::invalid_argument("galerkin: n_modes exceeds Nyquist");
    std::vector<cplx> z(size_t(2 * n_modes + 1));
    for (int k = -n_modes; k <= n_modes; ++k) z[size_t(k + n_modes)] = s.at(k);
    return z;
}

SpectralField galerkin_to_field(const std::vector<cplx>& z, int n_modes, const GridSpec& grid) {
    check_size(z, n_modes);
    if (grid.dim != 1) throw std::invalid_argument("galerkin: grid must be one-dimensional");
    if (n_modes > grid.nyquist()) throw std::invalid_argument("galerkin: n_modes exceeds Nyquist");
    SpectralField s(grid);
    for (int k = 0; k <= n_modes; ++k) s.ref(k) = z[size_t(k + n_modes)];
    return s;
}

} // namespace chaostats
