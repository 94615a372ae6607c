#include "chaostats/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace chaostats {

void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size())
        throw std::invalid_argument("adam_step: " + std::to_string(params.size()) +
                                    " params vs " + std::to_string(grads.size()) + " grads");
    if (state.m.empty()) {
        state.m.reserve(params.size());
        state.v.reserve(params.size());
        for (const Tensor& p : params) {
            state.m.emplace_back(p.shape, 0.0);
            state.v.emplace_back(p.shape, 0.0);
        }
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state holds " + std::to_string(state.m.size()) +
                                    " moments for " + std::to_string(params.size()) + " params");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(beta2, double(state.step));
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor& th = params[p];
        const Tensor& g = grads[p];
        if (th.shape != g.shape)
            throw std::invalid_argument("adam_step: param shape " + shape_str(th.shape) +
                                        " vs grad shape " + shape_str(g.shape));
        Tensor& m = state.m[p];
        Tensor& v = state.v[p];
        for (size_t i = 0; i < th.size(); ++i) {
            m.v[i] = beta1 * m.v[i] + (1.0 - beta1) * g.v[i];
            v.v[i] = beta2 * v.v[i] + (1.0 - beta2) * g.v[i] * g.v[i];
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            th.v[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

double steplr(double lr0, double gamma, int stepsize, int epoch) {
    if (stepsize <= 0) throw std::invalid_argument("steplr: stepsize must be positive");
    return lr0 * std::pow(gamma, double(epoch / stepsize));
}

} // namespace chaostats
