#pragma once
#include <functional>
#include <numbers>
#include <utility>

#include "chaostats/rng.hpp"
#include "chaostats/spectral.hpp"
#include "chaostats/trajectory.hpp"

namespace chaostats {

// 2D incompressible Navier-Stokes in vorticity form on a periodic square,
// with stationary Kolmogorov forcing (sin(alpha y), 0):
//     w_t = -u . grad w + (1/re) lap w - alpha cos(alpha y).
// Axis 0 is x, axis 1 is y.
struct NsParams {
    double re = 100.0;
    double length = 2.0 * std::numbers::pi;
    int forcing_wavenumber = 4;
    bool forcing_on = true;
};

// Divergence-free velocity from vorticity through the streamfunction
// (lap psi = -w, u = psi_y, v = -psi_x). Mean vorticity must be zero.
void velocity_from_vorticity(const SpectralField& w, SpectralField& u, SpectralField& v);
std::pair<RealField, RealField> velocity_from_vorticity(const RealField& w);

// Full right-hand side in spectral form: dealiased advection, exact viscous
// symbol, forcing curl when enabled. Mode (0,0) is identically zero.
SpectralField ns_rhs(const SpectralField& w, const NsParams& p);

// One Strang-split step: half viscous decay (exact factor), one Heun step of
// advection + forcing, half viscous decay. The optional extra term (closure
// model) accumulates into the advection-stage right-hand side; an empty
// function leaves the step bit-identical to the bare scheme.
using NsExtraTerm = std::function<void(const SpectralField& w, SpectralField& out)>;
SpectralField ns_split_step(const SpectralField& w, double dt, const NsParams& p,
                            const NsExtraTerm& extra = {});

// max point speed max(|u|_inf, |v|_inf); drives the CFL step choice
double ns_max_speed(const SpectralField& w);

// CFL-adaptive trajectory: internal steps obey
//     dt = cfl_number * dx / max(speed, 1e-8)
// and are shortened to land exactly on the uniform record times spaced
// cfg.dt * cfg.record_every apart. Throws on blow-up (speed or |w| > 1e6).
Trajectory ns_integrate(const RealField& w0, const SolverConfig& cfg, const NsParams& p,
                        Provenance tag = Provenance::frs, const NsExtraTerm& extra = {});

// random zero-mean band-limited vorticity, modes 1 <= |k|_inf <= kmax
SpectralField ns_random_ic(const GridSpec& grid, Rng& rng, int kmax = 4, double amp = 0.5);

} // namespace chaostats
