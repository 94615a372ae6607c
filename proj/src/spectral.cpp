#include "chaostats/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "chaostats/fft.hpp"

namespace chaostats {

namespace {

// largest |coefficient|, as the scale for relative symmetry checks
double coeff_scale(const SpectralField& s) {
    double m = 0.0;
    for (const cplx& z : s.c) m = std::max(m, std::abs(z));
    return std::max(m, 1.0);
}

// The storage keeps redundancy only where the r2c layout does: the 1D k=0 and
// Nyquist entries must be real, and in 2D the k1=0 and k1=Nyquist columns must
// be internally Hermitian along axis 0. Everything else is structural.
void check_hermitian(const SpectralField& s) {
    const double tol = 1e-10 * coeff_scale(s);
    const int nyq = s.grid.nyquist();
    if (s.grid.dim == 1) {
        if (std::abs(s.c[0].imag()) > tol || std::abs(s.c[size_t(nyq)].imag()) > tol)
            throw std::invalid_argument("inverse transform: broken Hermitian symmetry");
        return;
    }
    const int n = s.grid.n, M = s.grid.n / 2 + 1;
    for (int k1 : {0, nyq}) {
        for (int i0 = 0; i0 < n; ++i0) {
            const int i0m = i0 == 0 ? 0 : n - i0;
            const cplx a = s.c[size_t(i0) * M + k1];
            const cplx b = s.c[size_t(i0m) * M + k1];
            if (std::abs(a - std::conj(b)) > tol)
                throw std::invalid_argument("inverse transform: broken Hermitian symmetry");
        }
    }
}

} // namespace

SpectralField to_spectral(const RealField& f) {
    for (double x : f.v)
        if (!std::isfinite(x)) throw std::invalid_argument("forward transform: non-finite input");
    SpectralField s(f.grid);
    const double scale = 1.0 / double(f.grid.total());
    if (f.grid.dim == 1) {
        fft_r2c_1d(f.grid.n, 1, f.v.data(), s.c.data());
    } else {
        fft_r2c_2d(f.grid.n, f.grid.n, 1, f.v.data(), s.c.data());
    }
    for (auto& z : s.c) z *= scale;
    return s;
}

RealField to_real(const SpectralField& s) {
    check_hermitian(s);
    RealField f(s.grid);
    if (s.grid.dim == 1) {
        fft_c2r_1d(s.grid.n, 1, s.c.data(), f.v.data());
    } else {
        fft_c2r_2d(s.grid.n, s.grid.n, 1, s.c.data(), f.v.data());
    }
    return f;
}

SpectralField spectral_derivative(const SpectralField& s, int axis, int order) {
    if (axis < 0 || axis >= s.grid.dim) throw std::invalid_argument("spectral_derivative: bad axis");
    if (order < 1) throw std::invalid_argument("spectral_derivative: order must be >= 1");
    SpectralField out = s;
    const int n = s.grid.n, M = s.m(), nyq = s.grid.nyquist();
    const bool odd = (order % 2) != 0;

    auto sym = [&](int k) -> cplx {
        // (i*q)^order
        cplx iq(0.0, s.grid.q(k));
        cplx p(1.0, 0.0);
        for (int o = 0; o < order; ++o) p *= iq;
        return p;
    };

    if (s.grid.dim == 1) {
        for (int k = 0; k < M; ++k) out.c[size_t(k)] *= sym(k);
        if (odd) out.c[size_t(nyq)] = 0.0;
        return out;
    }
    for (int i0 = 0; i0 < n; ++i0) {
        const int k0 = s.grid.wavenum(i0);
        for (int k1 = 0; k1 < M; ++k1) {
            const int k = axis == 0 ? k0 : k1;
            cplx m = sym(k);
            if (odd && ((axis == 0 && std::abs(k0) == nyq) || (axis == 1 && k1 == nyq))) m = 0.0;
            out.ref(i0, k1) *= m;
        }
    }
    return out;
}

void truncate_modes(SpectralField& s, int cutoff) {
    if (cutoff < 0 || cutoff > s.grid.nyquist())
        throw std::invalid_argument("truncate_modes: cutoff outside [0, Nyquist]");
    const int n = s.grid.n, M = s.m();
    if (s.grid.dim == 1) {
        for (int k = cutoff + 1; k < M; ++k) s.c[size_t(k)] = 0.0;
        return;
    }
    for (int i0 = 0; i0 < n; ++i0) {
        const int k0 = s.grid.wavenum(i0);
        for (int k1 = 0; k1 < M; ++k1)
            if (std::abs(k0) > cutoff || k1 > cutoff) s.ref(i0, k1) = 0.0;
    }
}

void dealias_two_thirds(SpectralField& s) { truncate_modes(s, s.grid.dealias_cutoff()); }

SpectralField apply_filter(const SpectralField& s, const FilterSpec& spec) {
    if (spec.cutoff > s.grid.nyquist())
        throw std::invalid_argument("apply_filter: cutoff exceeds source Nyquist");
    if (spec.target.dim != s.grid.dim)
        throw std::invalid_argument("apply_filter: dimension mismatch");
    if (spec.target.length != s.grid.length)
        throw std::invalid_argument("apply_filter: domain length mismatch");
    SpectralField out(spec.target);
    const int K = spec.cutoff;
    const int nt = spec.target.n, nyt = spec.target.nyquist();
    // Two edge regimes when the kept band touches a Nyquist mode and the grids
    // differ. Downsampling onto the target Nyquist: the +-K pair of the
    // truncated function aliases onto one storage slot, so the pair is summed
    // (fold). Upsampling across the source Nyquist: the single stored slot
    // represents an aliased pair whose interpolant splits evenly between the
    // now-distinct target modes (split). The two are mutual inverses.
    const bool fold = (K == nyt) && (s.grid.n > nt);
    const bool split = (K == s.grid.nyquist()) && (nt > s.grid.n);
    if (s.grid.dim == 1) {
        for (int k = 0; k <= K; ++k) out.ref(k) = s.at(k);
        if (fold) out.ref(nyt) = s.at(nyt) + std::conj(s.at(nyt));
        if (split) out.ref(K) *= 0.5;
        return out;
    }
    for (int k0 = -K; k0 <= K; ++k0) {
        if (fold && k0 == -nyt) continue;  // same target row as +nyt, folded below
        if (split && k0 == -K) continue;   // same source row as +K, split below
        const int i0 = k0 >= 0 ? k0 : k0 + nt;
        for (int k1 = 0; k1 <= K; ++k1) out.ref(i0, k1) = s.at(k0, k1);
    }
    if (fold) {
        for (int k1 = 0; k1 < nyt; ++k1)  // +-Nyquist rows fold together
            out.ref(nyt, k1) = s.at(nyt, k1) + s.at(-nyt, k1);
        for (int k0 = -nyt + 1; k0 < nyt; ++k0) {  // +-Nyquist columns
            const int i0 = k0 >= 0 ? k0 : k0 + nt;
            out.ref(i0, nyt) = s.at(k0, nyt) + std::conj(s.at(-k0, nyt));
        }
        // corner: all four (+-N,+-N) continuous modes alias to one slot
        out.ref(nyt, nyt) = s.at(nyt, nyt) + s.at(-nyt, nyt) +
                            std::conj(s.at(nyt, nyt)) + std::conj(s.at(-nyt, nyt));
    }
    if (split) {
        for (int k1 = 0; k1 < K; ++k1) {  // source Nyquist row: half to each target row
            const cplx half = 0.5 * s.at(K, k1);
            out.ref(K, k1) = half;
            out.ref(nt - K, k1) = half;
        }
        for (int k0 = -K + 1; k0 < K; ++k0) {  // source Nyquist column
            const int i0 = k0 >= 0 ? k0 : k0 + nt;
            out.ref(i0, K) = 0.5 * s.at(k0, K);
        }
        const cplx quarter = 0.25 * s.at(K, K);  // corner: four-way split
        out.ref(K, K) = quarter;
        out.ref(nt - K, K) = quarter;
    }
    return out;
}

RealField apply_filter(const RealField& f, const FilterSpec& spec) {
    return to_real(apply_filter(to_spectral(f), spec));
}

RealField resample(const RealField& f, const GridSpec& target) {
    if (target.dim != f.grid.dim) throw std::invalid_argument("resample: dimension mismatch");
    if (target.length != f.grid.length) throw std::invalid_argument("resample: length mismatch");
    if (target.n == f.grid.n) return f;
    const int band = std::min(target.nyquist(), f.grid.nyquist());
    FilterSpec spec(band, target);
    return to_real(apply_filter(to_spectral(f), spec));
}

double spectral_energy(const SpectralField& s) {
    const int M = s.m(), nyq = s.grid.nyquist();
    double e = 0.0;
    if (s.grid.dim == 1) {
        for (int k = 0; k < M; ++k) {
            const double w = (k == 0 || k == nyq) ? 1.0 : 2.0;
            e += w * std::norm(s.c[size_t(k)]);
        }
        return e;
    }
    const int n = s.grid.n;
    for (int i0 = 0; i0 < n; ++i0)
        for (int k1 = 0; k1 < M; ++k1) {
            const double w = (k1 == 0 || k1 == nyq) ? 1.0 : 2.0;
            e += w * std::norm(s.c[size_t(i0) * M + k1]);
        }
    return e;
}

double mean_square(const RealField& f) {
    double e = 0.0;
    for (double x : f.v) e += x * x;
    return e / double(f.grid.total());
}

} // namespace chaostats
