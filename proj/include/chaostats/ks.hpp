#pragma once
#include <functional>
#include <numbers>
#include <vector>

#include "chaostats/rng.hpp"
#include "chaostats/spectral.hpp"
#include "chaostats/trajectory.hpp"

namespace chaostats {

// Kuramoto-Sivashinsky on a periodic domain:
//     u_t + u u_x + u_xx + nu u_xxxx = 0.
struct KsParams {
    double nu = 0.01;
    double length = 6.0 * std::numbers::pi;
};

// Right-hand side A(u) = -(u^2/2)_x - u_xx - nu u_xxxx in spectral form:
//     dz_k/dt = (q^2 - nu q^4) z_k - (i q / 2) (z*z)_k,   q = 2 pi k / length.
// The quadratic term is evaluated pseudo-spectrally with modes above `cutoff`
// zeroed on both the input and the product (alias-free for band-limited
// states when 2*cutoff <= n - cutoff). cutoff < 0 selects the 2/3 rule n/3.
SpectralField ks_rhs(const SpectralField& z, const KsParams& p, int cutoff = -1);

// ETDRK4 coefficient tables for a diagonal real linear symbol lam:
// E = exp(dt lam), E2 = exp(dt lam / 2), and the four phi-combinations
// Q, f1, f2, f3. The phi terms are averages of analytic functions with
// removable singularities at z = 0; they are evaluated by averaging over a
// 32-point complex contour |z - dt*lam| = 1, which is accurate for all
// magnitudes of dt*lam without case splits.
struct EtdCoeffs {
    std::vector<double> E, E2, Q, f1, f2, f3;
    EtdCoeffs() = default;
    EtdCoeffs(const std::vector<double>& lam, double dt);
};

// Fixed-step ETDRK4 integrator for KS in half-spectrum coordinates. The
// linear part is integrated exactly; the nonlinear term is the pseudo-
// spectral product above. An optional extra term (closure model, forcing)
// can be injected into the nonlinear stage evaluations.
class KsEtdrk4 {
  public:
    // cutoff < 0 selects the 2/3 rule (grid.n / 3)
    KsEtdrk4(const GridSpec& grid, const KsParams& params, double dt, int cutoff = -1);

    // one ETDRK4 step in place
    void step(SpectralField& z);

    // `steps` steps with a blow-up guard; throws naming the failure time if
    // max |u| exceeds 1e6 or turns non-finite. t0 only labels the error.
    void advance(SpectralField& z, int steps, double t0 = 0);

    const GridSpec& grid() const { return grid_; }
    const KsParams& params() const { return params_; }
    double dt() const { return dt_; }
    int cutoff() const { return cutoff_; }

    // extra nonlinear-stage term: add(z, out) accumulates into out
    using ExtraTerm = std::function<void(const SpectralField& z, SpectralField& out)>;
    void set_extra_term(ExtraTerm f) { extra_ = std::move(f); }

    // max |u(x)| seen in the most recent nonlinear evaluation
    double last_max_abs() const { return last_max_abs_; }

  private:
    void nonlinear(const SpectralField& z, SpectralField& out);

    GridSpec grid_;
    KsParams params_;
    double dt_;
    int cutoff_;
    EtdCoeffs co_;
    ExtraTerm extra_;
    double last_max_abs_ = 0;
    // stage workspaces (step is not thread-safe; use one integrator per thread)
    SpectralField nv_, na_, nb_, nc_, a_, b_, c_;
    RealField u_;
};

// single step at given dt (convenience wrapper; builds coefficients each call)
SpectralField ks_etdrk4_step(const SpectralField& z, double dt, const KsParams& p, int cutoff = -1);

// Fixed-step trajectory from u0: round(t_end/dt) steps, recording every
// record_every-th step including the initial state. Throws on blow-up. The
// optional extra term is installed on the integrator (closure injection); an
// empty function leaves the trajectory bit-identical to the bare scheme.
Trajectory ks_integrate(const RealField& u0, const SolverConfig& cfg, const KsParams& p,
                        int cutoff = -1, Provenance tag = Provenance::frs,
                        const KsEtdrk4::ExtraTerm& extra = {});

// Random band-limited start: modes 1..kmax get independent complex Gaussian
// coefficients of scale amp; mean mode stays zero.
SpectralField ks_random_ic(const GridSpec& grid, Rng& rng, int kmax = 8, double amp = 0.3);

} // namespace chaostats
