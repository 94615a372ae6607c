#pragma once
#include "chaostats/autodiff.hpp"
#include "chaostats/spectral.hpp"
#include "chaostats/trajectory.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace chaostats {

// Space-time Fourier neural operator: lifting P, n_layers blocks of
// (pointwise W + spectral K), two-stage projection Q. The input is u0
// replicated across t_frames time slots plus a normalized time-coordinate
// channel; the T output frames approximate the solution at times j*h/T.
struct FnoConfig {
    int n_layers = 4;
    int width = 32;
    int proj_width = 64;
    int modes_kept = 16;  // spatial wavenumbers 0..modes_kept-1 retained per axis
    int t_frames = 4;     // T: output slots covering (0, h]
    int spatial_dim = 1;
    double h = 0.1;       // prediction horizon in time units

    void validate() const;
};

struct FnoParams {
    FnoConfig cfg;
    std::vector<Tensor> tensors;  // order given by fno_param_names(cfg)
};

// retained rows over the time axis: wavenumbers 0..mt-1 and their negatives
int fno_time_rows(const FnoConfig& cfg);
// total retained space-time mode count M (rows of each spectral weight matrix)
int fno_mode_count(const FnoConfig& cfg);

// "p.w", "p.b", "layer0.w", "layer0.b", "layer0.r", ..., "q1.w", ... "q2.b"
std::vector<std::string> fno_param_names(const FnoConfig& cfg);

// scaled uniform init: spectral weights U(+-1/(width*M)), matrices
// U(+-1/sqrt(fan_in)), zero biases; deterministic in seed
FnoParams fno_init_params(const FnoConfig& cfg, uint64_t seed);

// batched input tensor (B, 2, T, n...) from initial fields (all same grid)
Tensor fno_build_input(const FnoConfig& cfg, const std::vector<const RealField*>& v0);

// append params as tape leaves, in fno_param_names order
std::vector<Tape::Id> fno_param_leaves(Tape& t, const FnoParams& p, bool requires_grad);

// differentiable forward: input (B, 2, T, n...) -> output (B, T, n...)
Tape::Id fno_forward_graph(Tape& t, const FnoConfig& cfg, const std::vector<Tape::Id>& params,
                           Tape::Id input);

// convenience single-field forward; frame j approximates the state at (j+1)h/T
std::vector<RealField> fno_forward(const FnoParams& p, const RealField& v0);

// autoregressive rollout: applies the h-map n_steps times feeding the last
// frame back; records the arrival state of every step at times {h, 2h, ...}
Trajectory fno_rollout(const FnoParams& p, const RealField& v0, int n_steps);

} // namespace chaostats
