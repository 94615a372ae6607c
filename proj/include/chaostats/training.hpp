#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "chaostats/autodiff.hpp"
#include "chaostats/fno.hpp"
#include "chaostats/ks.hpp"
#include "chaostats/rng.hpp"
#include "chaostats/trajectory.hpp"

namespace chaostats {

// One supervised sample: an input state and labels on a subset of the model's
// T output frames. frames[m] is the 0-based output slot of labels[m]; slot j
// approximates the state at time (j+1)/T * h after the input.
struct PairSample {
    RealField input;
    std::vector<RealField> labels;
    std::vector<int> frames;
};

// labeled input/label pairs sharing one grid, tagged by how they were made
// (coarse-grid or fully resolved runs)
struct PairDataset {
    GridSpec grid;
    Provenance provenance = Provenance::other;
    std::vector<PairSample> entries;

    void validate(int t_frames) const;
};

// unlabeled fine-grid initial states for the equation-residual loss
struct PdeInputSet {
    GridSpec grid;
    std::vector<RealField> inputs;

    void validate() const;
};

// residual-loss inputs built from a labeled dataset's input states by adding
// physical-space Gaussian noise with sigma = noise_rel * rms(state);
// deterministic in seed and independent of entry order
PdeInputSet pde_inputs_from_samples(const PairDataset& d, double noise_rel, uint64_t seed);

// deterministic Fisher-Yates shuffle driving all batch orders below
void shuffle_indices(std::vector<int>& idx, Rng& rng);

// Supervised loss of the batch `idx`: the model runs on the batch inputs and
// each sample contributes the mean over its labeled frames of the spatial rms
// distance to the label; the batch mean of those is returned.
Tape::Id data_loss_graph(Tape& t, const FnoConfig& cfg, const std::vector<Tape::Id>& params,
                         const PairDataset& d, const std::vector<int>& idx);
// whole-set evaluation convenience (chunked, no gradients)
double data_loss(const FnoParams& p, const PairDataset& d);

// Space-time rms of the KS residual u_t + u u_x + u_xx + nu u_xxxx evaluated
// on given frames (B,T,n) at spacing h/T: spatial terms in the solver's
// dealiased pseudo-spectral form, u_t by second-order differences over the
// frames (central inside, one-sided at both ends; needs T >= 3). Returns the
// batch mean of per-sample norms.
Tape::Id ks_residual_loss_graph(Tape& t, Tape::Id frames, const GridSpec& g, const KsParams& p,
                                double h);

// residual loss of the model's own output frames at the batch inputs
Tape::Id pde_loss_graph(Tape& t, const FnoConfig& cfg, const std::vector<Tape::Id>& params,
                        const PdeInputSet& d, const std::vector<int>& idx, const KsParams& p);
double pde_loss(const FnoParams& p, const PdeInputSet& d, const KsParams& pk);

// piecewise-constant decay for loss weights: value(t) for 1-based epoch t is
// start / divisor^floor((t-1)/period), or 0 once t > zero_after when that is
// set; non-increasing by construction
struct DecaySchedule {
    double start = 1.0;
    double divisor = 2.0;
    int period = 100;
    int zero_after = -1;  // if >= 0: value(t) = 0 for all t > zero_after

    double value(int t) const;
    void validate() const;
};

struct OptimConfig {
    double lr = 5e-2;
    double gamma = 0.7;
    int stepsize = 100;
};

// Stage plan: supervised pretraining on coarse data, mixed coarse+resolved
// refinement with the coarse weight decaying, and residual-dominated
// fine-tuning with the resolved-data weight decaying.
struct StageSchedule {
    int n1 = 0, n2 = 0, n3 = 0;  // epochs per stage
    OptimConfig opt1, opt2, opt3;
    int batch1 = 32;
    int batch2 = 32;       // per set in stage 2
    int batch3_data = 4;   // labeled samples per stage-3 step
    int batch3_pde = 4;    // residual inputs per stage-3 step
    DecaySchedule lambda1; // stage-2 weight on the coarse data loss
    DecaySchedule lambda2; // stage-3 weight on the resolved data loss

    void validate() const;
};

struct LossReport {
    int stage = 0;     // 1..3
    int epoch = 0;     // 1-based within the stage
    double loss = 0;   // epoch mean of the minimized objective
    double lambda = 0; // active weight (1 in stage 1)
    double lr = 0;
};

struct MultistageResult {
    FnoParams params;
    std::vector<LossReport> log;
    std::vector<FnoParams> checkpoints;  // parameter state after each stage
};

// Runs the three stages with fresh Adam state per stage:
//   stage 1: J_data(coarse)
//   stage 2: lambda1(t) * J_data(coarse) + J_data(resolved)
//   stage 3: lambda2(t) * J_data(resolved) + J_pde(residual inputs)
// Deterministic given seed (stage s draws from Rng::child(seed, s)); throws
// on a non-finite loss naming the stage and epoch. Stage 3 requires 1D.
MultistageResult train_multistage(const FnoConfig& cfg, const PairDataset& cgs,
                                  const PairDataset& frs, const PdeInputSet& pde,
                                  const KsParams& pk, const StageSchedule& sched, uint64_t seed);

// mean over aligned frames of ||pred - truth||_2 / ||truth||_2
double relative_l2_error(const std::vector<RealField>& pred, const std::vector<RealField>& truth);

} // namespace chaostats
