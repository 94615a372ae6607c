#pragma once

#include <complex>
#include <vector>

#include "chaostats/fno.hpp"
#include "chaostats/trajectory.hpp"

namespace chaostats {

// Tape-free forward pass of the composite-step surrogate, specialized for
// repeated batched evaluation: parameters are copied once into GEMM-ready
// layouts, scratch buffers and transform plans are reused across steps, and
// only the spatial axes go through the FFT (the short time axis is contracted
// against precomputed twiddle tables). Produces the same values as running the
// differentiable graph, without building a tape.
class FnoEvaluator {
  public:
    FnoEvaluator(const FnoParams& params, int batch, int n_resolution);

    int batch() const { return B_; }
    int resolution() const { return n_; }
    const FnoConfig& config() const { return cfg_; }

    // One composite step for a batch of states, each of sites() reals,
    // packed member-major. in == out is allowed.
    void step(const double* in, double* out);

    // Convenience wrapper over RealField batches.
    void step_fields(const std::vector<const RealField*>& in, std::vector<RealField>& out);

  private:
    using cplx = std::complex<double>;

    void gather_chunk(const cplx* chunk, cplx* z) const;
    void scatter_chunk(const cplx* z_in, cplx* chunk);

    FnoConfig cfg_;
    int B_ = 0;
    int n_ = 0;
    int T_ = 0;
    int w_ = 0;
    int pw_ = 0;
    int mt_ = 0;  // retained nonnegative time wavenumbers
    int rt_ = 0;  // retained time rows (2*mt-1)
    int mk_ = 0;  // retained last-axis columns
    int M_ = 0;   // modes per spectral block
    int mlast_ = 0;
    int sites_ = 0;
    int shalf_ = 0; // complex entries per (time row) of one chunk's spectrum
    double scale_ = 0.0;

    // parameters, GEMM-ready
    std::vector<double> pw_mat_, pb_;
    std::vector<std::vector<double>> lw_, lb_;
    std::vector<std::vector<cplx>> rblkT_; // per layer: (M, w_in, w_out), scale folded into twf_
    std::vector<double> q1_, b1_, q2_;
    double b2_ = 0.0;

    // retained-mode bookkeeping
    std::vector<int> ktab_;   // time wavenumber per retained row
    std::vector<cplx> twf_;   // forward twiddles (rt, T), 1/(T*sites) folded in
    std::vector<cplx> twi_;   // inverse twiddles (T, rt)

    // scratch
    std::vector<double> lift_in_, v_, wout_, kbuf_, vfin_, p1_;
    std::vector<cplx> spec_f_, spec_i_, g1_, g2_, y1_, y2_, zrow_;
};

// Batched surrogate rollout: advances every member of v0 through n_steps
// composite steps of length cfg.h, recording each step. Throws on non-finite
// states, identifying the failing step and member.
std::vector<Trajectory> fno_eval_rollout(const FnoParams& params,
                                         const std::vector<RealField>& v0, int n_steps);

} // namespace chaostats
