#pragma once
#include <vector>

#include "chaostats/ks.hpp"
#include "chaostats/spectral.hpp"

namespace chaostats {

// Truncated Galerkin form of KS in mode coordinates. Modes k in
// [-n_modes, n_modes] are stored at index k + n_modes (Hermitian: z_{-k} is
// expected to equal conj(z_k)). The mode ODE is
//     dz_k/dt = (q_k^2 - nu q_k^4) z_k - (i q_k / 2) sum_{j+l=k} z_j z_l
// with q_k = 2 pi k / length and the sum over |j|,|l| <= n_modes. The direct
// O(n_modes^2) convolution here is the slow cross-check for the
// pseudo-spectral right-hand side.
std::vector<cplx> ks_galerkin_rhs(const std::vector<cplx>& z, const KsParams& p, int n_modes);

// classical RK4 on the Galerkin system, fixed step
std::vector<cplx> ks_galerkin_integrate(std::vector<cplx> z, const KsParams& p, int n_modes,
                                        double dt, int steps);

// extract modes [-n_modes, n_modes] from a half-spectrum field
std::vector<cplx> galerkin_from_field(const SpectralField& s, int n_modes);

// place mode coordinates into a half-spectrum field on `grid` (rest zero)
SpectralField galerkin_to_field(const std::vector<cplx>& z, int n_modes, const GridSpec& grid);

} // namespace chaostats
