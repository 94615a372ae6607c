#include "chaostats/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "chaostats/optim.hpp"
#include "chaostats/spectral.hpp"

namespace chaostats {

void PairDataset::validate(int t_frames) const {
    if (provenance != Provenance::cgs && provenance != Provenance::frs)
        throw std::invalid_argument("pair dataset: provenance must be cgs or frs");
    if (t_frames < 1) throw std::invalid_argument("pair dataset: t_frames must be >= 1");
    for (const PairSample& s : entries) {
        if (s.input.grid != grid)
            throw std::invalid_argument("pair dataset: entry grid differs from dataset grid");
        if (s.labels.empty() || s.labels.size() != s.frames.size())
            throw std::invalid_argument("pair dataset: labels and frame mask differ in size or are empty");
        int prev = -1;
        for (size_t m = 0; m < s.frames.size(); ++m) {
            if (s.frames[m] <= prev || s.frames[m] >= t_frames)
                throw std::invalid_argument(
                    "pair dataset: frame mask must be strictly increasing within [0, T)");
            prev = s.frames[m];
            if (s.labels[m].grid != grid)
                throw std::invalid_argument("pair dataset: label grid differs from dataset grid");
        }
    }
}

void PdeInputSet::validate() const {
    for (const RealField& f : inputs)
        if (f.grid != grid)
            throw std::invalid_argument("residual input set: entry grid differs from set grid");
}

PdeInputSet pde_inputs_from_samples(const PairDataset& d, double noise_rel, uint64_t seed) {
    if (!(noise_rel >= 0))
        throw std::invalid_argument("residual inputs: noise level must be >= 0");
    PdeInputSet out;
    out.grid = d.grid;
    out.inputs.reserve(d.entries.size());
    for (size_t i = 0; i < d.entries.size(); ++i) {
        const RealField& base = d.entries[i].input;
        Rng rng = Rng::child(seed, i);
        const double sigma = noise_rel * std::sqrt(mean_square(base));
        RealField f = base;
        for (double& x : f.v) x += sigma * rng.normal();
        out.inputs.push_back(std::move(f));
    }
    return out;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[size_t(rng.next_u64() % uint64_t(i))]);
}

Tape::Id data_loss_graph(Tape& t, const FnoConfig& cfg, const std::vector<Tape::Id>& params,
                         const PairDataset& d, const std::vector<int>& idx) {
    if (idx.empty()) throw std::invalid_argument("data loss: empty batch");
    std::vector<const RealField*> ptr;
    ptr.reserve(idx.size());
    for (int i : idx) {
        if (i < 0 || i >= int(d.entries.size()))
            throw std::out_of_range("data loss: batch index out of range");
        ptr.push_back(&d.entries[size_t(i)].input);
    }
    Tape::Id y = fno_forward_graph(t, cfg, params, t.leaf(fno_build_input(cfg, ptr)));
    const int n = d.grid.n;
    const std::vector<int> lab_shape =
        cfg.spatial_dim == 2 ? std::vector<int>{1, 1, n, n} : std::vector<int>{1, 1, n};
    Tape::Id total = -1;
    for (size_t b = 0; b < idx.size(); ++b) {
        const PairSample& s = d.entries[size_t(idx[b])];
        Tape::Id yb = t.slice(y, 0, int(b), int(b) + 1);
        Tape::Id snorm = -1;
        for (size_t m = 0; m < s.frames.size(); ++m) {
            Tape::Id f = t.slice(yb, 1, s.frames[m], s.frames[m] + 1);
            Tensor lab(lab_shape);
            std::copy(s.labels[m].v.begin(), s.labels[m].v.end(), lab.v.begin());
            Tape::Id dd = t.sub(f, t.leaf(std::move(lab)));
            Tape::Id nm = t.sqrt_elem(t.mean(t.mul(dd, dd)));
            snorm = snorm < 0 ? nm : t.add(snorm, nm);
        }
        snorm = t.scale(snorm, 1.0 / double(s.frames.size()));
        total = total < 0 ? snorm : t.add(total, snorm);
    }
    return t.scale(total, 1.0 / double(idx.size()));
}

double data_loss(const FnoParams& p, const PairDataset& d) {
    d.validate(p.cfg.t_frames);
    if (d.entries.empty()) throw std::invalid_argument("data loss: empty dataset");
    const int N = int(d.entries.size());
    const int chunk = 32;
    double acc = 0;
    for (int s = 0; s < N; s += chunk) {
        const int B = std::min(chunk, N - s);
        std::vector<int> idx(static_cast<size_t>(B));
        std::iota(idx.begin(), idx.end(), s);
        Tape t;
        auto ids = fno_param_leaves(t, p, false);
        acc += t.val(data_loss_graph(t, p.cfg, ids, d, idx))[0] * B;
    }
    return acc / double(N);
}

Tape::Id ks_residual_loss_graph(Tape& t, Tape::Id frames, const GridSpec& g, const KsParams& p,
                                double h) {
    const Tensor& tf = t.val(frames);
    if (g.dim != 1) throw std::invalid_argument("ks residual: 1D grids only");
    if (!(p.nu > 0)) throw std::invalid_argument("ks residual: nu must be positive");
    if (!(h > 0)) throw std::invalid_argument("ks residual: h must be positive");
    if (tf.shape.size() != 3 || tf.shape[2] != g.n)
        throw std::invalid_argument("ks residual: frames must be (B, T, n) on the given grid, got " +
                                    shape_str(tf.shape));
    const int T = tf.shape[1];
    if (T < 3)
        throw std::invalid_argument("ks residual: need at least 3 frames for time differences");
    const int n = g.n, m = n / 2 + 1, cutoff = g.dealias_cutoff();
    const double half_idt = 0.5 * double(T) / h;  // 1/(2 dt) at frame spacing dt = h/T

    // u_t: central differences inside, one-sided second-order at both ends
    Tape::Id first = t.scale(t.add(t.add(t.scale(t.slice(frames, 1, 0, 1), -3.0),
                                         t.scale(t.slice(frames, 1, 1, 2), 4.0)),
                                   t.scale(t.slice(frames, 1, 2, 3), -1.0)),
                             half_idt);
    Tape::Id central = t.scale(t.sub(t.slice(frames, 1, 2, T), t.slice(frames, 1, 0, T - 2)),
                               half_idt);
    Tape::Id last = t.scale(t.add(t.add(t.scale(t.slice(frames, 1, T - 1, T), 3.0),
                                        t.scale(t.slice(frames, 1, T - 2, T - 1), -4.0)),
                                  t.slice(frames, 1, T - 3, T - 2)),
                            half_idt);
    Tape::Id ut = t.concat({first, central, last}, 1);

    // spatial terms in the solver's form: linear symbol on all modes, the
    // quadratic term band-limited before squaring and its derivative
    // restricted to the dealiased band
    Tape::Id z = t.rfft(frames, 1);
    std::vector<cplx> wlin(static_cast<size_t>(m)), wband(static_cast<size_t>(m)), wderiv(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
        const double q = g.q(k);
        wlin[size_t(k)] = cplx((-q * q + p.nu * q * q * q * q) / double(n), 0.0);
        wband[size_t(k)] = k <= cutoff ? cplx(1.0 / double(n), 0.0) : cplx(0.0, 0.0);
        wderiv[size_t(k)] = (k <= cutoff && k < g.nyquist()) ? cplx(0.0, q * 0.5 / double(n))
                                                             : cplx(0.0, 0.0);
    }
    Tape::Id lin = t.irfft(t.cmul_const(z, wlin), 1, n);
    Tape::Id uc = t.irfft(t.cmul_const(z, wband), 1, n);
    Tape::Id uux = t.irfft(t.cmul_const(t.rfft(t.mul(uc, uc), 1), wderiv), 1, n);

    Tape::Id r = t.add(t.add(ut, uux), lin);
    return t.mean(t.sqrt_elem(t.mean_trailing(t.mul(r, r), 2)));
}

Tape::Id pde_loss_graph(Tape& t, const FnoConfig& cfg, const std::vector<Tape::Id>& params,
                        const PdeInputSet& d, const std::vector<int>& idx, const KsParams& p) {
    if (cfg.spatial_dim != 1)
        throw std::invalid_argument("pde loss: the residual is implemented for 1D");
    if (idx.empty()) throw std::invalid_argument("pde loss: empty batch");
    std::vector<const RealField*> ptr;
    ptr.reserve(idx.size());
    for (int i : idx) {
        if (i < 0 || i >= int(d.inputs.size()))
            throw std::out_of_range("pde loss: batch index out of range");
        ptr.push_back(&d.inputs[size_t(i)]);
    }
    Tape::Id y = fno_forward_graph(t, cfg, params, t.leaf(fno_build_input(cfg, ptr)));
    return ks_residual_loss_graph(t, y, d.grid, p, cfg.h);
}

double pde_loss(const FnoParams& p, const PdeInputSet& d, const KsParams& pk) {
    d.validate();
    if (d.inputs.empty()) throw std::invalid_argument("pde loss: empty input set");
    const int N = int(d.inputs.size());
    const int chunk = 16;
    double acc = 0;
    for (int s = 0; s < N; s += chunk) {
        const int B = std::min(chunk, N - s);
        std::vector<int> idx(static_cast<size_t>(B));
        std::iota(idx.begin(), idx.end(), s);
        Tape t;
        auto ids = fno_param_leaves(t, p, false);
        acc += t.val(pde_loss_graph(t, p.cfg, ids, d, idx, pk))[0] * B;
    }
    return acc / double(N);
}

double DecaySchedule::value(int t) const {
    if (t < 1) throw std::invalid_argument("decay schedule: epochs are 1-based");
    if (zero_after >= 0 && t > zero_after) return 0.0;
    return start * std::pow(1.0 / divisor, double((t - 1) / period));
}

void DecaySchedule::validate() const {
    if (!(start >= 0)) throw std::invalid_argument("decay schedule: start must be >= 0");
    if (!(divisor >= 1)) throw std::invalid_argument("decay schedule: divisor must be >= 1");
    if (period < 1) throw std::invalid_argument("decay schedule: period must be >= 1");
}

void StageSchedule::validate() const {
    if (n1 < 0 || n2 < 0 || n3 < 0)
        throw std::invalid_argument("stage schedule: epoch counts must be >= 0");
    if (batch1 < 1 || batch2 < 1 || batch3_data < 1 || batch3_pde < 1)
        throw std::invalid_argument("stage schedule: batch sizes must be >= 1");
    for (const OptimConfig* o : {&opt1, &opt2, &opt3})
        if (!(o->lr > 0) || !(o->gamma > 0) || o->stepsize < 1)
            throw std::invalid_argument("stage schedule: bad optimizer settings");
    lambda1.validate();
    lambda2.validate();
}

namespace {

// shuffled pass over [0, n) that refills and reshuffles when exhausted
struct CyclicSampler {
    std::vector<int> order;
    size_t pos;

    explicit CyclicSampler(int n) : order(size_t(n)), pos(size_t(n)) {
        std::iota(order.begin(), order.end(), 0);
    }

    std::vector<int> draw(int k, Rng& rng) {
        std::vector<int> out;
        out.reserve(size_t(k));
        for (int i = 0; i < k; ++i) {
            if (pos == order.size()) {
                shuffle_indices(order, rng);
                pos = 0;
            }
            out.push_back(order[pos++]);
        }
        return out;
    }
};

void check_finite(double lv, int stage, int epoch) {
    if (!std::isfinite(lv))
        throw std::runtime_error("multistage training: non-finite loss at stage " +
                                 std::to_string(stage) + ", epoch " + std::to_string(epoch));
}

} // namespace

MultistageResult train_multistage(const FnoConfig& cfg, const PairDataset& cgs,
                                  const PairDataset& frs, const PdeInputSet& pde,
                                  const KsParams& pk, const StageSchedule& sched, uint64_t seed) {
    cfg.validate();
    sched.validate();
    if (sched.n1 > 0 || sched.n2 > 0) {
        cgs.validate(cfg.t_frames);
        if (cgs.entries.empty())
            throw std::invalid_argument("multistage training: coarse dataset is empty");
    }
    if (sched.n2 > 0 || sched.n3 > 0) {
        frs.validate(cfg.t_frames);
        if (frs.entries.empty())
            throw std::invalid_argument("multistage training: resolved dataset is empty");
    }
    if (sched.n3 > 0) {
        pde.validate();
        if (pde.inputs.empty())
            throw std::invalid_argument("multistage training: residual input set is empty");
        if (cfg.spatial_dim != 1)
            throw std::invalid_argument("multistage training: the residual loss is 1D-only");
    }

    MultistageResult out;
    out.params = fno_init_params(cfg, seed);

    auto run_step = [&](Tape& t, const std::vector<Tape::Id>& ids, Tape::Id loss,
                        AdamState& adam, double lr, int stage, int epoch) {
        const double lv = t.val(loss)[0];
        check_finite(lv, stage, epoch);
        t.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(ids.size());
        for (Tape::Id id : ids) grads.push_back(t.grad(id));
        adam_step(out.params.tensors, grads, adam, lr);
        return lv;
    };

    // stage 1: supervised pretraining on the coarse set
    {
        Rng rng = Rng::child(seed, 1);
        AdamState adam;
        std::vector<int> order(cgs.entries.size());
        std::iota(order.begin(), order.end(), 0);
        const int N = int(order.size());
        for (int ep = 1; ep <= sched.n1; ++ep) {
            const double lr = steplr(sched.opt1.lr, sched.opt1.gamma, sched.opt1.stepsize, ep - 1);
            shuffle_indices(order, rng);
            double acc = 0;
            for (int s = 0; s < N; s += sched.batch1) {
                const int B = std::min(sched.batch1, N - s);
                std::vector<int> idx(order.begin() + s, order.begin() + s + B);
                Tape t;
                auto ids = fno_param_leaves(t, out.params, true);
                acc += B * run_step(t, ids, data_loss_graph(t, cfg, ids, cgs, idx), adam, lr, 1, ep);
            }
            out.log.push_back({1, ep, acc / N, 1.0, lr});
        }
    }
    out.checkpoints.push_back(out.params);

    // stage 2: coarse + resolved data, coarse weight decaying
    {
        Rng rng = Rng::child(seed, 2);
        AdamState adam;
        std::vector<int> order(cgs.entries.size());
        std::iota(order.begin(), order.end(), 0);
        const int N = int(order.size());
        CyclicSampler fcycle(int(frs.entries.size()));
        const int fbatch = std::min(sched.batch2, int(frs.entries.size()));
        for (int ep = 1; ep <= sched.n2; ++ep) {
            const double lr = steplr(sched.opt2.lr, sched.opt2.gamma, sched.opt2.stepsize, ep - 1);
            const double lam = sched.lambda1.value(ep);
            shuffle_indices(order, rng);
            double acc = 0;
            for (int s = 0; s < N; s += sched.batch2) {
                const int B = std::min(sched.batch2, N - s);
                std::vector<int> idxc(order.begin() + s, order.begin() + s + B);
                std::vector<int> idxf = fcycle.draw(fbatch, rng);
                Tape t;
                auto ids = fno_param_leaves(t, out.params, true);
                Tape::Id lf = data_loss_graph(t, cfg, ids, frs, idxf);
                Tape::Id loss =
                    lam > 0 ? t.add(t.scale(data_loss_graph(t, cfg, ids, cgs, idxc), lam), lf)
                            : lf;
                acc += B * run_step(t, ids, loss, adam, lr, 2, ep);
            }
            out.log.push_back({2, ep, acc / N, lam, lr});
        }
    }
    out.checkpoints.push_back(out.params);

    // stage 3: equation residual with a decaying resolved-data term
    {
        Rng rng = Rng::child(seed, 3);
        AdamState adam;
        std::vector<int> order(pde.inputs.size());
        std::iota(order.begin(), order.end(), 0);
        const int N = int(order.size());
        CyclicSampler fcycle(int(frs.entries.size()));
        const int dbatch = std::min(sched.batch3_data, int(frs.entries.size()));
        for (int ep = 1; ep <= sched.n3; ++ep) {
            const double lr = steplr(sched.opt3.lr, sched.opt3.gamma, sched.opt3.stepsize, ep - 1);
            const double lam = sched.lambda2.value(ep);
            shuffle_indices(order, rng);
            double acc = 0;
            for (int s = 0; s < N; s += sched.batch3_pde) {
                const int B = std::min(sched.batch3_pde, N - s);
                std::vector<int> idxp(order.begin() + s, order.begin() + s + B);
                Tape t;
                auto ids = fno_param_leaves(t, out.params, true);
                Tape::Id lp = pde_loss_graph(t, cfg, ids, pde, idxp, pk);
                Tape::Id loss = lp;
                if (lam > 0) {
                    std::vector<int> idxf = fcycle.draw(dbatch, rng);
                    loss = t.add(t.scale(data_loss_graph(t, cfg, ids, frs, idxf), lam), lp);
                }
                acc += B * run_step(t, ids, loss, adam, lr, 3, ep);
            }
            out.log.push_back({3, ep, acc / N, lam, lr});
        }
    }
    out.checkpoints.push_back(out.params);

    return out;
}

double relative_l2_error(const std::vector<RealField>& pred, const std::vector<RealField>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("relative error: frame counts differ or are empty");
    double acc = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i].grid != truth[i].grid)
            throw std::invalid_argument("relative error: frame grids differ");
        double num = 0, den = 0;
        for (size_t j = 0; j < pred[i].v.size(); ++j) {
            const double d = pred[i].v[j] - truth[i].v[j];
            num += d * d;
            den += truth[i].v[j] * truth[i].v[j];
        }
        if (den == 0.0) throw std::invalid_argument("relative error: zero-norm truth frame");
        acc += std::sqrt(num / den);
    }
    return acc / double(pred.size());
}

} // namespace chaostats
