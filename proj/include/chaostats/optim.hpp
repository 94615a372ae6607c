#pragma once
#include "chaostats/autodiff.hpp"

#include <vector>

namespace chaostats {

// First/second moment accumulators for Adam; allocated lazily to match the
// parameter shapes on the first step.
struct AdamState {
    std::vector<Tensor> m, v;
    long step = 0;
};

// Standard bias-corrected Adam update, in place. params and grads must match
// one-to-one in shape. Deterministic: no internal randomness.
void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// Step decay: lr0 * gamma^floor(epoch / stepsize).
double steplr(double lr0, double gamma, int stepsize, int epoch);

} // namespace chaostats
