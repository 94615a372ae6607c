#include "chaostats/closure.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "chaostats/optim.hpp"
#include "math_kernels.hpp"
#include "chaostats/rng.hpp"

namespace chaostats {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void gelu_inplace(MatRM& x) {
    detail::gelu_forward_inplace(x.data(), size_t(x.size()));
}

SpectralField sub_fields(const SpectralField& a, const SpectralField& b) {
    SpectralField out = a;
    for (size_t i = 0; i < out.c.size(); ++i) out.c[i] -= b.c[i];
    return out;
}

} // namespace

void SingleStateModel::validate() const {
    if (width < 1 || n_layers < 1 || kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("single-state model: bad architecture numbers");
    if (int(weights.size()) != 2 * n_layers)
        throw std::invalid_argument("single-state model: expected " +
                                    std::to_string(2 * n_layers) + " weight tensors, got " +
                                    std::to_string(weights.size()));
    for (int l = 0; l < n_layers; ++l) {
        const int ci = l == 0 ? 1 : width;
        const int co = l == n_layers - 1 ? 1 : width;
        if (weights[2 * size_t(l)].shape != std::vector<int>{co, ci, kernel} ||
            weights[2 * size_t(l) + 1].shape != std::vector<int>{co})
            throw std::invalid_argument("single-state model: layer " + std::to_string(l) +
                                        " weight shape mismatch");
    }
    for (const Tensor& t : weights)
        for (double x : t.v)
            if (!std::isfinite(x))
                throw std::invalid_argument("single-state model: non-finite weight");
}

RealField SingleStateModel::apply(const RealField& u) const {
    validate();
    if (u.grid.dim != 1)
        throw std::invalid_argument("single-state model: 1D coarse fields only");
    const int n = u.grid.n, K = kernel, H = K / 2;
    MatRM cur(1, n);
    for (int j = 0; j < n; ++j) cur(0, j) = u.v[size_t(j)];
    for (int l = 0; l < n_layers; ++l) {
        const Tensor& W = weights[2 * size_t(l)];
        const Tensor& b = weights[2 * size_t(l) + 1];
        const int C = int(cur.rows()), O = W.shape[0];
        // periodic window unroll: X(c*K+t, j) = cur(c, (j+t-H) mod n)
        MatRM X(C * K, n);
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < K; ++t) {
                const int sh = ((t - H) % n + n) % n;
                double* row = X.row(c * K + t).data();
                const double* src = cur.row(c).data();
                std::copy(src + sh, src + n, row);
                std::copy(src, src + sh, row + (n - sh));
            }
        MatRM nxt(O, n);
        nxt.noalias() = Eigen::Map<const MatRM>(W.v.data(), O, C * K) * X;
        for (int o = 0; o < O; ++o) nxt.row(o).array() += b.v[size_t(o)];
        if (l + 1 < n_layers) gelu_inplace(nxt);
        cur = std::move(nxt);
    }
    RealField out(u.grid);
    for (int j = 0; j < n; ++j) out.v[size_t(j)] = cur(0, j);
    return out;
}

SingleStateModel single_state_init(int width, int n_layers, int kernel, uint64_t seed) {
    SingleStateModel m;
    m.width = width;
    m.n_layers = n_layers;
    m.kernel = kernel;
    Rng rng(seed);
    for (int l = 0; l < n_layers; ++l) {
        const int ci = l == 0 ? 1 : width;
        const int co = l == n_layers - 1 ? 1 : width;
        Tensor w({co, ci, kernel});
        const double gain = std::sqrt(3.0 / double(ci * kernel));
        for (double& x : w.v) x = rng.uniform(-gain, gain);
        m.weights.push_back(std::move(w));
        m.weights.emplace_back(std::vector<int>{co});
    }
    m.validate();
    return m;
}

ClosureSpec ClosureSpec::eddy_viscosity(double coeff) {
    ClosureSpec c;
    c.kind = ClosureKind::eddy_viscosity;
    c.coeff = coeff;
    return c;
}

ClosureSpec ClosureSpec::smagorinsky(double cs) {
    ClosureSpec c;
    c.kind = ClosureKind::smagorinsky;
    c.cs = cs;
    return c;
}

ClosureSpec ClosureSpec::learned(const SingleStateModel* m) {
    ClosureSpec c;
    c.kind = ClosureKind::learned_single_state;
    c.model = m;
    return c;
}

void ClosureSpec::validate(int dim) const {
    switch (kind) {
        case ClosureKind::none:
            return;
        case ClosureKind::eddy_viscosity:
            if (!(coeff >= 0))
                throw std::invalid_argument("closure: eddy-viscosity coefficient must be >= 0");
            if (dim != 1)
                throw std::invalid_argument("closure: eddy viscosity is the 1D closure");
            return;
        case ClosureKind::smagorinsky:
            if (!(cs >= 0)) throw std::invalid_argument("closure: cs must be >= 0");
            if (dim != 2)
                throw std::invalid_argument("closure: Smagorinsky is the 2D closure");
            return;
        case ClosureKind::learned_single_state:
            if (model == nullptr)
                throw std::invalid_argument("closure: learned closure needs a model");
            model->validate();
            if (dim != 1)
                throw std::invalid_argument("closure: the single-state model is 1D");
            return;
    }
}

bool ClosureSpec::active() const {
    switch (kind) {
        case ClosureKind::none: return false;
        case ClosureKind::eddy_viscosity: return coeff != 0.0;
        case ClosureKind::smagorinsky: return cs != 0.0;
        case ClosureKind::learned_single_state: return true;
    }
    return false;
}

SpectralField eddy_viscosity_term(const SpectralField& u_bar, double coeff) {
    SpectralField out = u_bar;
    if (u_bar.grid.dim != 1)
        throw std::invalid_argument("eddy_viscosity_term: 1D fields only");
    for (int k = 0; k < out.m(); ++k) {
        const double q = out.grid.q(k);
        out.ref(k) *= -coeff * q * q;
    }
    return out;
}

RealField eddy_viscosity_term(const RealField& u_bar, double coeff) {
    return to_real(eddy_viscosity_term(to_spectral(u_bar), coeff));
}

RealField strain_rate_magnitude(const RealField& w_bar) {
    if (w_bar.grid.dim != 2)
        throw std::invalid_argument("strain_rate_magnitude: 2D vorticity only");
    SpectralField w = to_spectral(w_bar);
    SpectralField u(w.grid), v(w.grid);
    velocity_from_vorticity(w, u, v);
    RealField ux = to_real(spectral_derivative(u, 0, 1));
    RealField uy = to_real(spectral_derivative(u, 1, 1));
    RealField vx = to_real(spectral_derivative(v, 0, 1));
    RealField vy = to_real(spectral_derivative(v, 1, 1));
    RealField out(w_bar.grid);
    for (size_t i = 0; i < out.v.size(); ++i) {
        const double s11 = ux.v[i], s22 = vy.v[i];
        const double s12 = 0.5 * (uy.v[i] + vx.v[i]);
        out.v[i] = std::sqrt(2.0 * (s11 * s11 + s22 * s22 + 2.0 * s12 * s12));
    }
    return out;
}

SpectralField smagorinsky_term(const SpectralField& w_bar, double cs) {
    if (w_bar.grid.dim != 2)
        throw std::invalid_argument("smagorinsky_term: 2D vorticity only");
    RealField wr = to_real(w_bar);
    RealField smag = strain_rate_magnitude(wr);
    const double pref = cs * w_bar.grid.dx();
    const double c2 = pref * pref;
    RealField wx = to_real(spectral_derivative(w_bar, 0, 1));
    RealField wy = to_real(spectral_derivative(w_bar, 1, 1));
    RealField fx(w_bar.grid), fy(w_bar.grid);
    for (size_t i = 0; i < fx.v.size(); ++i) {
        const double nu_t = c2 * smag.v[i];
        fx.v[i] = nu_t * wx.v[i];
        fy.v[i] = nu_t * wy.v[i];
    }
    SpectralField sx = to_spectral(fx);
    SpectralField sy = to_spectral(fy);
    dealias_two_thirds(sx);
    dealias_two_thirds(sy);
    SpectralField out = spectral_derivative(sx, 0, 1);
    SpectralField oy = spectral_derivative(sy, 1, 1);
    for (size_t i = 0; i < out.c.size(); ++i) out.c[i] += oy.c[i];
    return out;
}

RealField smagorinsky_term(const RealField& w_bar, double cs) {
    return to_real(smagorinsky_term(to_spectral(w_bar), cs));
}

SpectralField closure_term(const SpectralField& state, const ClosureSpec& c) {
    c.validate(state.grid.dim);
    switch (c.kind) {
        case ClosureKind::none: break;
        case ClosureKind::eddy_viscosity: return eddy_viscosity_term(state, c.coeff);
        case ClosureKind::smagorinsky: return smagorinsky_term(state, c.cs);
        case ClosureKind::learned_single_state:
            return to_spectral(c.model->apply(to_real(state)));
    }
    return SpectralField(state.grid); // zero
}

namespace {

KsEtdrk4::ExtraTerm make_extra(const ClosureSpec& c) {
    return [c](const SpectralField& z, SpectralField& out) {
        SpectralField term = closure_term(z, c);
        for (size_t i = 0; i < out.c.size(); ++i) out.c[i] += term.c[i];
    };
}

} // namespace

SpectralField cgs_step(const SpectralField& v, double dt, const ClosureSpec& c,
                       const KsParams& p, int cutoff) {
    c.validate(1);
    KsEtdrk4 stepper(v.grid, p, dt, cutoff);
    if (c.active()) stepper.set_extra_term(make_extra(c));
    SpectralField z = v;
    stepper.advance(z, 1);
    return z;
}

SpectralField cgs_step(const SpectralField& w, double dt, const ClosureSpec& c,
                       const NsParams& p) {
    c.validate(2);
    if (c.active()) return ns_split_step(w, dt, p, make_extra(c));
    return ns_split_step(w, dt, p);
}

Trajectory cgs_integrate(const RealField& u0, const SolverConfig& cfg, const KsParams& p,
                         const ClosureSpec& c, int cutoff) {
    c.validate(1);
    return ks_integrate(u0, cfg, p, cutoff, Provenance::cgs,
                        c.active() ? make_extra(c) : KsEtdrk4::ExtraTerm{});
}

Trajectory cgs_integrate(const RealField& w0, const SolverConfig& cfg, const NsParams& p,
                         const ClosureSpec& c) {
    c.validate(2);
    return ns_integrate(w0, cfg, p, Provenance::cgs,
                        c.active() ? make_extra(c) : NsExtraTerm{});
}

namespace {

template <class Params, class Rhs>
CommutatorSample commutator_impl(const RealField& u_fine, const FilterSpec& filter,
                                 const Params& p, bool second_term_fine, Rhs&& rhs) {
    SpectralField z = to_spectral(u_fine);
    SpectralField fa = apply_filter(rhs(z, p), filter);  // F(A u), dynamics at fine res
    SpectralField fu = apply_filter(z, filter);          // F u on the coarse grid
    SpectralField af;                                    // A(F u)
    if (second_term_fine) {
        RealField up = resample(to_real(fu), u_fine.grid);
        af = apply_filter(rhs(to_spectral(up), p), filter);
    } else {
        af = rhs(fu, p);
    }
    CommutatorSample s;
    s.filtered_state = to_real(fu);
    s.target = to_real(sub_fields(fa, af));
    return s;
}

} // namespace

CommutatorSample commutator_target(const RealField& u_fine, const FilterSpec& filter,
                                   const KsParams& p, bool second_term_fine) {
    if (u_fine.grid.dim != 1)
        throw std::invalid_argument("commutator_target: KS states are 1D");
    return commutator_impl(u_fine, filter, p, second_term_fine,
                           [](const SpectralField& z, const KsParams& kp) {
                               return ks_rhs(z, kp);
                           });
}

CommutatorSample commutator_target(const RealField& w_fine, const FilterSpec& filter,
                                   const NsParams& p, bool second_term_fine) {
    if (w_fine.grid.dim != 2)
        throw std::invalid_argument("commutator_target: vorticity states are 2D");
    return commutator_impl(w_fine, filter, p, second_term_fine,
                           [](const SpectralField& z, const NsParams& np) {
                               return ns_rhs(z, np);
                           });
}

namespace {

// differentiable forward of the conv net; weight ids in model order
Tape::Id single_state_forward(Tape& t, const std::vector<Tape::Id>& wids, Tape::Id x,
                              int n_layers) {
    Tape::Id cur = x;
    for (int l = 0; l < n_layers; ++l) {
        cur = t.conv1d_periodic(cur, wids[2 * size_t(l)]);
        cur = t.add_channel_bias(cur, wids[2 * size_t(l) + 1], 1);
        if (l + 1 < n_layers) cur = t.gelu(cur);
    }
    return cur;
}

} // namespace

double field_rms(const RealField& f) { return std::sqrt(mean_square(f)); }

std::pair<SingleStateModel, SingleStateReport> train_single_state(
    const std::vector<CommutatorSample>& data, const SingleStateTrainConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("single-state training: empty dataset");
    const GridSpec g = data[0].filtered_state.grid;
    if (g.dim != 1)
        throw std::invalid_argument("single-state training: 1D coarse fields only");
    for (const CommutatorSample& s : data)
        if (s.filtered_state.grid != g || s.target.grid != g)
            throw std::invalid_argument("single-state training: inconsistent coarse grids");
    if (cfg.epochs < 1 || cfg.batch < 1)
        throw std::invalid_argument("single-state training: epochs and batch must be >= 1");

    const int N = int(data.size());
    const int n_val = std::min(N - 1, int(std::floor(cfg.val_fraction * N)));
    const int n_train = N - n_val;

    SingleStateModel model = single_state_init(cfg.width, cfg.n_layers, cfg.kernel, cfg.seed);
    AdamState adam;
    Rng rng(cfg.seed + 1);
    std::vector<int> order(static_cast<size_t>(n_train));
    for (int i = 0; i < n_train; ++i) order[size_t(i)] = i;

    SingleStateReport report;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the deterministic stream
        for (int i = n_train - 1; i > 0; --i)
            std::swap(order[size_t(i)], order[size_t(rng.next_u64() % (uint64_t(i) + 1))]);
        const double lr = steplr(cfg.lr, cfg.lr_gamma, cfg.lr_stepsize, epoch);
        double ep_loss = 0.0;
        for (int start = 0; start < n_train; start += cfg.batch) {
            const int B = std::min(cfg.batch, n_train - start);
            Tape t;
            std::vector<Tape::Id> wids;
            for (Tensor& w : model.weights) wids.push_back(t.leaf(w, true));
            Tensor x({B, 1, g.n}), y({B, 1, g.n});
            for (int b = 0; b < B; ++b) {
                const CommutatorSample& s = data[size_t(order[size_t(start + b)])];
                std::copy(s.filtered_state.v.begin(), s.filtered_state.v.end(),
                          x.v.begin() + size_t(b) * size_t(g.n));
                std::copy(s.target.v.begin(), s.target.v.end(),
                          y.v.begin() + size_t(b) * size_t(g.n));
            }
            Tape::Id pred = single_state_forward(t, wids, t.leaf(std::move(x)), cfg.n_layers);
            Tape::Id d = t.sub(pred, t.leaf(std::move(y)));
            Tape::Id loss = t.mean(t.mul(d, d));
            const double lv = t.val(loss)[0];
            if (!std::isfinite(lv))
                throw std::runtime_error("single-state training: non-finite loss at epoch " +
                                         std::to_string(epoch));
            ep_loss += lv * B;
            t.backward(loss);
            std::vector<Tensor> grads;
            for (Tape::Id id : wids) grads.push_back(t.grad(id));
            adam_step(model.weights, grads, adam, lr);
        }
        report.epoch_loss.push_back(ep_loss / n_train);
    }
    report.final_train = report.epoch_loss.back();

    auto eval_mse = [&](int begin, int end) {
        double acc = 0.0;
        for (int i = begin; i < end; ++i) {
            RealField pred = model.apply(data[size_t(i)].filtered_state);
            double s = 0.0;
            for (size_t j = 0; j < pred.v.size(); ++j) {
                const double e = pred.v[j] - data[size_t(i)].target.v[j];
                s += e * e;
            }
            acc += s / double(pred.v.size());
        }
        return acc / double(end - begin);
    };
    report.final_val = n_val > 0 ? eval_mse(n_train, N) : report.final_train;
    return {std::move(model), std::move(report)};
}

NonuniquenessReport nonuniqueness_demo(const RealField& u1, const RealField& u2,
                                       const FilterSpec& filter, const KsParams& p,
                                       const SingleStateModel* model, double tol) {
    if (u1.grid != u2.grid)
        throw std::invalid_argument("nonuniqueness_demo: states on different grids");
    if (u1.grid.dim != 1)
        throw std::invalid_argument("nonuniqueness_demo: KS states are 1D");
    SpectralField z1 = to_spectral(u1), z2 = to_spectral(u2);
    RealField f1 = to_real(apply_filter(z1, filter));
    RealField f2 = to_real(apply_filter(z2, filter));
    RealField fd(f1.grid);
    for (size_t i = 0; i < fd.v.size(); ++i) fd.v[i] = f1.v[i] - f2.v[i];
    const double scale = std::max(1.0, field_rms(f1));
    if (field_rms(fd) > 1e-12 * scale)
        throw std::invalid_argument(
            "nonuniqueness_demo: the two states do not filter to the same coarse field");

    NonuniquenessReport rep;
    SpectralField da = sub_fields(ks_rhs(z1, p), ks_rhs(z2, p));
    rep.bound = 0.5 * field_rms(to_real(apply_filter(da, filter)));

    if (model != nullptr) {
        CommutatorSample s1 = commutator_target(u1, filter, p);
        CommutatorSample s2 = commutator_target(u2, filter, p);
        RealField p1 = model->apply(s1.filtered_state);
        RealField p2 = model->apply(s2.filtered_state);
        auto rms_diff = [](const RealField& a, const RealField& b) {
            double s = 0.0;
            for (size_t i = 0; i < a.v.size(); ++i) {
                const double e = a.v[i] - b.v[i];
                s += e * e;
            }
            return std::sqrt(s / double(a.v.size()));
        };
        rep.err1 = rms_diff(p1, s1.target);
        rep.err2 = rms_diff(p2, s2.target);
        rep.model_checked = true;
        rep.bound_respected = std::max(rep.err1, rep.err2) >= rep.bound - tol;
    }
    return rep;
}

} // namespace chaostats
