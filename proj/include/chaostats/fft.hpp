#pragma once
#include <complex>
#include <cstddef>

namespace chaostats {

// Thin wrapper over FFTW double-precision transforms.
//
// All plans are created with FFTW_ESTIMATE (never MEASURE): plan selection is
// then independent of runtime timings, which keeps results bit-identical from
// run to run on one machine. Plans are cached per thread; creation takes a
// global lock because the FFTW planner is not thread safe, execution is.
//
// Transforms are unnormalized, exactly like raw FFTW; callers apply the 1/N
// convention themselves.
//
// Layouts, batch index b outermost, contiguous:
//   r2c_1d:  real[b*n + j]            -> cplx[b*(n/2+1) + k]
//   c2r_1d:  cplx[b*(n/2+1) + k]      -> real[b*n + j]         (input preserved)
//   r2c_2d:  real[b*n0*n1 + i0*n1+i1] -> cplx[b*n0*(n1/2+1) + i0*(n1/2+1)+k1]
//   c2r_2d:  likewise transposed       (input clobbered by FFTW; wrapper copies)
void fft_r2c_1d(int n, int howmany, const double* in, std::complex<double>* out);
void fft_c2r_1d(int n, int howmany, const std::complex<double>* in, double* out);
void fft_r2c_2d(int n0, int n1, int howmany, const double* in, std::complex<double>* out);
void fft_c2r_2d(int n0, int n1, int howmany, const std::complex<double>* in, double* out);
void fft_r2c_3d(int n0, int n1, int n2, int howmany, const double* in, std::complex<double>* out);
void fft_c2r_3d(int n0, int n1, int n2, int howmany, const std::complex<double>* in, double* out);

// drop every cached plan owned by the calling thread (mostly for leak checkers)
void fft_clear_thread_cache();

} // namespace chaostats
