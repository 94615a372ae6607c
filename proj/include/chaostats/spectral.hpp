#pragma once
#include <complex>
#include <vector>

#include "chaostats/grid.hpp"

namespace chaostats {

using cplx = std::complex<double>;

// Field of real values on a periodic grid, row-major for dim 2.
struct RealField {
    GridSpec grid;
    std::vector<double> v;

    RealField() = default;
    explicit RealField(GridSpec g) : grid(g), v(g.total(), 0.0) {}

    double& at(int i) { return v[size_t(i)]; }
    double at(int i) const { return v[size_t(i)]; }
    double& at(int i0, int i1) { return v[size_t(i0) * grid.n + i1]; }
    double at(int i0, int i1) const { return v[size_t(i0) * grid.n + i1]; }
};

// Fourier coefficients under the fixed convention
//     u_hat(k) = (1/N_total) * sum_j u(x_j) exp(-i k . x_j * 2pi/length),
// stored as the r2c half spectrum: the last axis keeps k = 0..n/2 only and
// negative-k values are the conjugates of their mirror. Keeping only the half
// spectrum makes Hermitian symmetry structural; a full-spectrum state would
// let a roundoff-seeded non-Hermitian component ride the linear instability
// of the dynamics modules unchecked (it is invisible to Re(ifft)).
//
// Layout: dim 1 -> c[k], k = 0..n/2 (M = n/2+1 entries);
//         dim 2 -> c[i0*M + k1], axis-0 index i0 = 0..n-1 (signed wavenumber
//                  via GridSpec::wavenum), k1 = 0..n/2.
struct SpectralField {
    GridSpec grid;
    std::vector<cplx> c;

    SpectralField() = default;
    explicit SpectralField(GridSpec g)
        : grid(g), c(g.dim == 1 ? size_t(g.n / 2 + 1) : size_t(g.n) * (g.n / 2 + 1), cplx(0, 0)) {}

    int m() const { return grid.n / 2 + 1; }

    // coefficient at signed wavenumber, dim 1
    cplx at(int k) const { return k >= 0 ? c[size_t(k)] : std::conj(c[size_t(-k)]); }
    // coefficient at signed wavenumber pair, dim 2
    cplx at(int k0, int k1) const {
        if (k1 < 0) { k0 = -k0; k1 = -k1; return std::conj(at(k0, k1)); }
        int i0 = k0 >= 0 ? k0 : k0 + grid.n;
        return c[size_t(i0) * m() + k1];
    }
    cplx& ref(int k) { return c[size_t(k)]; }
    cplx& ref(int i0, int k1) { return c[size_t(i0) * m() + k1]; }
};

// transform pair; to_real(to_spectral(f)) == f to roundoff
SpectralField to_spectral(const RealField& f);
RealField to_real(const SpectralField& s);

// d^order/dx_axis^order via multiplication by (i*q_k)^order, q_k = 2pi k/length.
// For odd orders the single-sided Nyquist mode has no consistent sign and is
// zeroed; even orders keep it.
SpectralField spectral_derivative(const SpectralField& s, int axis, int order);

// 2/3-rule dealiasing: zero all modes with |k|_inf > n/3, in place
void dealias_two_thirds(SpectralField& s);

// zero modes with |k|_inf > cutoff, in place (cutoff <= Nyquist checked)
void truncate_modes(SpectralField& s, int cutoff);

// orthogonal projection onto the band |k|_inf <= spec.cutoff, re-expressed on
// spec.target; source band must already be representable there
SpectralField apply_filter(const SpectralField& s, const FilterSpec& spec);
RealField apply_filter(const RealField& f, const FilterSpec& spec);

// spectral resampling: zero-pad (upsample) or truncate (downsample) the band
RealField resample(const RealField& f, const GridSpec& target);

// sum over the full signed spectrum of |u_hat|^2; equals mean(u^2) (Parseval)
double spectral_energy(const SpectralField& s);

// mean of u^2 on the grid
double mean_square(const RealField& f);

} // namespace chaostats
