#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "chaostats/autodiff.hpp"
#include "chaostats/ks.hpp"
#include "chaostats/ns.hpp"
#include "chaostats/spectral.hpp"
#include "chaostats/trajectory.hpp"

namespace chaostats {

// Small periodic-convolution network mapping a 1D coarse field to a coarse
// field of the same resolution: n_layers convolutions of odd kernel size,
// hidden width channels, gelu between layers. Weights are stored as the tape
// tensors [filter (O,C,K), bias (O)] per layer, so the fast apply() below and
// a differentiable forward built on the same tensors agree.
struct SingleStateModel {
    int width = 64;
    int n_layers = 4;
    int kernel = 5;
    std::vector<Tensor> weights;

    void validate() const;
    // fast inference (Eigen GEMM over an unrolled periodic window)
    RealField apply(const RealField& u) const;
};

// random init: filters U(+-sqrt(3/fan_in)), biases zero
SingleStateModel single_state_init(int width, int n_layers, int kernel, uint64_t seed);

enum class ClosureKind { none, eddy_viscosity, smagorinsky, learned_single_state };

// Pluggable closure term for coarse-grid simulation: the named term is added
// to the solver right-hand side at every nonlinear stage evaluation.
struct ClosureSpec {
    ClosureKind kind = ClosureKind::none;
    double coeff = 0.0;  // eddy-viscosity strength (1D)
    double cs = 0.17;    // Smagorinsky constant (2D)
    const SingleStateModel* model = nullptr;

    static ClosureSpec none() { return {}; }
    static ClosureSpec eddy_viscosity(double coeff);
    static ClosureSpec smagorinsky(double cs);
    static ClosureSpec learned(const SingleStateModel* m);

    // checks parameter signs, model presence, and dimension compatibility
    void validate(int dim) const;
    // false when the term is identically zero (none, or zero coefficient):
    // such closures are not installed at all, keeping the step bit-identical
    // to the bare scheme
    bool active() const;
};

// coeff * u_xx of the coarse field (added diffusion on the resolved band)
RealField eddy_viscosity_term(const RealField& u_bar, double coeff);
SpectralField eddy_viscosity_term(const SpectralField& u_bar, double coeff);

// strain-rate magnitude |S| = sqrt(2 S:S) of the velocity recovered from
// coarse vorticity (2D)
RealField strain_rate_magnitude(const RealField& w_bar);

// Smagorinsky contribution div(nu_t grad w_bar), nu_t = (cs dx)^2 |S|,
// products dealiased by the 2/3 rule
RealField smagorinsky_term(const RealField& w_bar, double cs);
SpectralField smagorinsky_term(const SpectralField& w_bar, double cs);

// the closure contribution for one state, dispatching on kind (zero for none)
SpectralField closure_term(const SpectralField& state, const ClosureSpec& c);

// One coarse-grid step with the closure added to the right-hand side before
// time integration. Inactive closures leave the step bit-identical to the
// bare coarse scheme.
SpectralField cgs_step(const SpectralField& v, double dt, const ClosureSpec& c,
                       const KsParams& p, int cutoff = -1);
SpectralField cgs_step(const SpectralField& w, double dt, const ClosureSpec& c,
                       const NsParams& p);

// closured coarse trajectories (Provenance::cgs)
Trajectory cgs_integrate(const RealField& u0, const SolverConfig& cfg, const KsParams& p,
                         const ClosureSpec& c, int cutoff = -1);
Trajectory cgs_integrate(const RealField& w0, const SolverConfig& cfg, const NsParams& p,
                         const ClosureSpec& c);

// One a-priori training pair: the filtered fine state and the commutator
// between filtering and dynamics evaluated from the fine snapshot.
struct CommutatorSample {
    RealField filtered_state;  // F u on the coarse grid
    RealField target;          // F(A u) - A(F u) on the coarse grid
};

// F(A u) - A(F u): the first term evaluates the dynamics at fine resolution
// and filters; the second applies the dynamics the coarse solver actually
// sees (coarse resolution, 2/3-dealiased). second_term_fine instead evaluates
// A(F u) at fine resolution (spectral upsampling) and filters the result —
// the alternative reading of the target.
CommutatorSample commutator_target(const RealField& u_fine, const FilterSpec& filter,
                                   const KsParams& p, bool second_term_fine = false);
CommutatorSample commutator_target(const RealField& w_fine, const FilterSpec& filter,
                                   const NsParams& p, bool second_term_fine = false);

struct SingleStateTrainConfig {
    int width = 64;
    int n_layers = 4;
    int kernel = 5;
    int epochs = 300;
    int batch = 16;
    double lr = 1e-2;
    double lr_gamma = 0.7;
    int lr_stepsize = 100;
    double val_fraction = 0.1;
    uint64_t seed = 0;
};

struct SingleStateReport {
    std::vector<double> epoch_loss;  // mean train MSE per epoch
    double final_train = 0.0;
    double final_val = 0.0;
};

// Minimizes mean squared error of model(filtered_state) against target with
// Adam + step decay. Deterministic for a fixed seed. Throws on an empty or
// grid-inconsistent dataset and on a non-finite loss (naming the epoch).
std::pair<SingleStateModel, SingleStateReport> train_single_state(
    const std::vector<CommutatorSample>& data, const SingleStateTrainConfig& cfg);

// root-mean-square magnitude; the norm used by the training loss and the
// non-uniqueness bound
double field_rms(const RealField& f);

struct NonuniquenessReport {
    double bound = 0.0;  // half the rms distance between the two commutator targets
    double err1 = 0.0;   // model's rms error against target of u1
    double err2 = 0.0;
    bool model_checked = false;
    bool bound_respected = true;  // max(err1, err2) >= bound - tol
};

// Constructive accuracy floor for closure models: u1, u2 must filter to the
// same coarse state (to 1e-12), yet their commutator targets differ; any
// single-state map then errs by at least bound = (1/2)||F(A u1 - A u2)|| on
// one of them. If a model is supplied its two errors are evaluated and
// checked against the bound.
NonuniquenessReport nonuniqueness_demo(const RealField& u1, const RealField& u2,
                                       const FilterSpec& filter, const KsParams& p,
                                       const SingleStateModel* model = nullptr,
                                       double tol = 1e-6);

} // namespace chaostats
