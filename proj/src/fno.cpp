#include "chaostats/fno.hpp"

#include "chaostats/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace chaostats {

void FnoConfig::validate() const {
    if (n_layers < 1 || width < 1 || proj_width < 1)
        throw std::invalid_argument("fno: layer/width counts must be positive");
    if (t_frames < 2) throw std::invalid_argument("fno: t_frames must be at least 2");
    if (modes_kept < 1) throw std::invalid_argument("fno: modes_kept must be positive");
    if (spatial_dim != 1 && spatial_dim != 2)
        throw std::invalid_argument("fno: spatial_dim must be 1 or 2");
    if (h <= 0) throw std::invalid_argument("fno: horizon h must be positive");
}

int fno_time_rows(const FnoConfig& cfg) {
    const int mt = std::min(cfg.modes_kept, (cfg.t_frames + 1) / 2);
    return 2 * mt - 1;
}

int fno_mode_count(const FnoConfig& cfg) {
    const int rt = fno_time_rows(cfg);
    if (cfg.spatial_dim == 1) return rt * cfg.modes_kept;
    return rt * (2 * cfg.modes_kept - 1) * cfg.modes_kept;
}

std::vector<std::string> fno_param_names(const FnoConfig& cfg) {
    std::vector<std::string> names{"p.w", "p.b"};
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string base = "layer" + std::to_string(l);
        names.push_back(base + ".w");
        names.push_back(base + ".b");
        names.push_back(base + ".r");
    }
    names.insert(names.end(), {"q1.w", "q1.b", "q2.w", "q2.b"});
    return names;
}

FnoParams fno_init_params(const FnoConfig& cfg, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const int M = fno_mode_count(cfg);
    auto uniform_fill = [&](Tensor& t, double gain) {
        for (double& x : t.v) x = rng.uniform(-gain, gain);
    };
    FnoParams p;
    p.cfg = cfg;
    const double spectral_gain = 1.0 / (double(cfg.width) * double(M));
    // variance-preserving uniform for the dense maps: U(+-sqrt(3/fan_in))
    auto matrix_gain = [](int fan_in) { return std::sqrt(3.0 / double(fan_in)); };

    Tensor pw({cfg.width, 2});
    uniform_fill(pw, matrix_gain(2));
    p.tensors.push_back(std::move(pw));
    p.tensors.emplace_back(std::vector<int>{cfg.width}, 0.0);

    for (int l = 0; l < cfg.n_layers; ++l) {
        Tensor w({cfg.width, cfg.width});
        uniform_fill(w, matrix_gain(cfg.width));
        p.tensors.push_back(std::move(w));
        p.tensors.emplace_back(std::vector<int>{cfg.width}, 0.0);
        Tensor r({M, cfg.width, cfg.width, 2});
        uniform_fill(r, spectral_gain);
        p.tensors.push_back(std::move(r));
    }

    Tensor q1({cfg.proj_width, cfg.width});
    uniform_fill(q1, matrix_gain(cfg.width));
    p.tensors.push_back(std::move(q1));
    p.tensors.emplace_back(std::vector<int>{cfg.proj_width}, 0.0);
    Tensor q2({1, cfg.proj_width});
    uniform_fill(q2, matrix_gain(cfg.proj_width));
    p.tensors.push_back(std::move(q2));
    p.tensors.emplace_back(std::vector<int>{1}, 0.0);
    return p;
}

Tensor fno_build_input(const FnoConfig& cfg, const std::vector<const RealField*>& v0) {
    cfg.validate();
    if (v0.empty()) throw std::invalid_argument("fno: empty input batch");
    const GridSpec& g = v0[0]->grid;
    if (g.dim != cfg.spatial_dim)
        throw std::invalid_argument("fno: grid dim " + std::to_string(g.dim) +
                                    " does not match configured spatial_dim " +
                                    std::to_string(cfg.spatial_dim));
    if (g.n < 2 * cfg.modes_kept)
        throw std::invalid_argument("fno: resolution " + std::to_string(g.n) +
                                    " is below 2*modes_kept = " +
                                    std::to_string(2 * cfg.modes_kept));
    const int B = int(v0.size());
    const int T = cfg.t_frames;
    const size_t sites = v0[0]->v.size();
    std::vector<int> shape{B, 2, T, g.n};
    if (cfg.spatial_dim == 2) shape.push_back(g.n);
    Tensor in(shape);
    for (int b = 0; b < B; ++b) {
        if (v0[size_t(b)]->grid != g)
            throw std::invalid_argument("fno: batch members live on different grids");
        for (int j = 0; j < T; ++j) {
            double* slot =
                in.v.data() + ((size_t(b) * 2 + 0) * size_t(T) + size_t(j)) * sites;
            const std::vector<double>& src = v0[size_t(b)]->v;
            std::copy(src.begin(), src.end(), slot);
            double* tch = in.v.data() + ((size_t(b) * 2 + 1) * size_t(T) + size_t(j)) * sites;
            const double tval = double(j + 1) / double(T);
            std::fill(tch, tch + sites, tval);
        }
    }
    return in;
}

std::vector<Tape::Id> fno_param_leaves(Tape& t, const FnoParams& p, bool requires_grad) {
    std::vector<Tape::Id> ids;
    ids.reserve(p.tensors.size());
    for (const Tensor& w : p.tensors) ids.push_back(t.leaf(w, requires_grad));
    return ids;
}

namespace {

// spectral block: normalized space-time transform, retained-mode mixing by r,
// zero-padded inverse. Returns (B, C, T, n...) -> (B, O, T, n...).
Tape::Id spectral_block(Tape& t, const FnoConfig& cfg, Tape::Id v, Tape::Id r, int n) {
    const int T = cfg.t_frames;
    const int mt = std::min(cfg.modes_kept, (T + 1) / 2);
    const int rt = 2 * mt - 1;
    const int mk = cfg.modes_kept;
    const Tensor& tv = t.val(v);
    const int B = tv.shape[0], C = tv.shape[1];

    if (cfg.spatial_dim == 1) {
        const int m = n / 2 + 1;
        auto f = t.rfft(v, 2);  // (B, C, T, m, 2)
        f = t.scale(f, 1.0 / (double(T) * double(n)));
        // retained time rows: 0..mt-1 then negatives -(mt-1)..-1
        Tape::Id rows = mt == 1 ? t.slice(f, 2, 0, 1)
                                : t.concat({t.slice(f, 2, 0, mt), t.slice(f, 2, T - mt + 1, T)}, 2);
        auto blk = t.reshape(t.slice(rows, 3, 0, mk), {B, C, rt * mk, 2});
        auto mix = t.reshape(t.spectral_matmul(r, blk), {B, C, rt, mk, 2});
        auto pad = t.embed(mix, 3, 0, m);  // (B, C, rt, m, 2)
        Tape::Id full;
        if (mt == 1) {
            full = t.embed(pad, 2, 0, T);
        } else {
            auto top = t.embed(t.slice(pad, 2, 0, mt), 2, 0, T);
            auto bot = t.embed(t.slice(pad, 2, mt, rt), 2, T - mt + 1, T);
            full = t.add(top, bot);
        }
        return t.irfft(full, 2, n);  // (B, C, T, n)
    }

    // spatial_dim == 2: transform over (T, n0, n1); axis0 rows signed, axis1 halved
    const int m1 = n / 2 + 1;
    const int r0 = 2 * mk - 1;
    auto f = t.rfft(v, 3);  // (B, C, T, n, m1, 2)
    f = t.scale(f, 1.0 / (double(T) * double(n) * double(n)));
    Tape::Id trows = mt == 1
                         ? t.slice(f, 2, 0, 1)
                         : t.concat({t.slice(f, 2, 0, mt), t.slice(f, 2, T - mt + 1, T)}, 2);
    Tape::Id xrows = t.concat({t.slice(trows, 3, 0, mk), t.slice(trows, 3, n - mk + 1, n)}, 3);
    auto blk = t.reshape(t.slice(xrows, 4, 0, mk), {B, C, rt * r0 * mk, 2});
    auto mix = t.reshape(t.spectral_matmul(r, blk), {B, C, rt, r0, mk, 2});
    auto pad = t.embed(mix, 4, 0, m1);  // (B, C, rt, r0, m1, 2)
    // scatter the signed spatial rows back
    auto xtop = t.embed(t.slice(pad, 3, 0, mk), 3, 0, n);
    auto xbot = t.embed(t.slice(pad, 3, mk, r0), 3, n - mk + 1, n);
    auto xfull = t.add(xtop, xbot);  // (B, C, rt, n, m1, 2)
    Tape::Id full;
    if (mt == 1) {
        full = t.embed(xfull, 2, 0, T);
    } else {
        auto ttop = t.embed(t.slice(xfull, 2, 0, mt), 2, 0, T);
        auto tbot = t.embed(t.slice(xfull, 2, mt, rt), 2, T - mt + 1, T);
        full = t.add(ttop, tbot);
    }
    return t.irfft(full, 3, n);  // (B, C, T, n, n)
}

} // namespace

Tape::Id fno_forward_graph(Tape& t, const FnoConfig& cfg, const std::vector<Tape::Id>& params,
                           Tape::Id input) {
    cfg.validate();
    if (params.size() != 4 + 3 * size_t(cfg.n_layers) + 2)
        throw std::invalid_argument("fno: expected " +
                                    std::to_string(6 + 3 * size_t(cfg.n_layers)) +
                                    " parameter tensors, got " + std::to_string(params.size()));
    const Tensor& tin = t.val(input);
    const int want_rank = 3 + cfg.spatial_dim;
    if (int(tin.shape.size()) != want_rank || tin.shape[1] != 2 || tin.shape[2] != cfg.t_frames)
        throw std::invalid_argument("fno: input shape " + shape_str(tin.shape) +
                                    " does not match (B, 2, T, n...)");
    const int B = tin.shape[0];
    const int T = cfg.t_frames;
    const int n = tin.shape[3];
    if (cfg.spatial_dim == 2 && tin.shape[4] != n)
        throw std::invalid_argument("fno: expected square grids, got " + shape_str(tin.shape));
    if (n < 2 * cfg.modes_kept)
        throw std::invalid_argument("fno: resolution " + std::to_string(n) +
                                    " is below 2*modes_kept = " +
                                    std::to_string(2 * cfg.modes_kept));
    const int sites = cfg.spatial_dim == 1 ? T * n : T * n * n;
    std::vector<int> grid_shape = cfg.spatial_dim == 1 ? std::vector<int>{B, cfg.width, T, n}
                                                       : std::vector<int>{B, cfg.width, T, n, n};

    // lifting
    auto v = t.matmul(params[0], t.reshape(input, {B, 2, sites}));
    v = t.add_channel_bias(v, params[1], 1);  // (B, width, sites)

    for (int l = 0; l < cfg.n_layers; ++l) {
        const Tape::Id wl = params[2 + 3 * size_t(l)];
        const Tape::Id bl = params[3 + 3 * size_t(l)];
        const Tape::Id rl = params[4 + 3 * size_t(l)];
        auto wpath = t.matmul(wl, v);
        auto kpath = t.reshape(spectral_block(t, cfg, t.reshape(v, grid_shape), rl, n),
                               {B, cfg.width, sites});
        v = t.add_channel_bias(t.add(wpath, kpath), bl, 1);
        if (l + 1 < cfg.n_layers) v = t.gelu(v);
    }

    // projection
    v = t.gelu(t.add_channel_bias(t.matmul(params[params.size() - 4], v),
                                  params[params.size() - 3], 1));
    v = t.add_channel_bias(t.matmul(params[params.size() - 2], v), params[params.size() - 1], 1);
    std::vector<int> out_shape = cfg.spatial_dim == 1 ? std::vector<int>{B, T, n}
                                                      : std::vector<int>{B, T, n, n};
    return t.reshape(v, out_shape);
}

std::vector<RealField> fno_forward(const FnoParams& p, const RealField& v0) {
    Tape t;
    auto ids = fno_param_leaves(t, p, false);
    auto in = t.leaf(fno_build_input(p.cfg, {&v0}));
    auto out = t.val(fno_forward_graph(t, p.cfg, ids, in));
    const size_t sites = v0.v.size();
    std::vector<RealField> frames;
    frames.reserve(size_t(p.cfg.t_frames));
    for (int j = 0; j < p.cfg.t_frames; ++j) {
        RealField f(v0.grid);
        std::copy(out.v.begin() + size_t(j) * sites, out.v.begin() + size_t(j + 1) * sites,
                  f.v.begin());
        frames.push_back(std::move(f));
    }
    return frames;
}

Trajectory fno_rollout(const FnoParams& p, const RealField& v0, int n_steps) {
    if (n_steps < 1) throw std::invalid_argument("fno rollout: n_steps must be at least 1");
    Trajectory traj{v0.grid, Provenance::fno_rollout, {}, {}};
    RealField state = v0;
    for (int s = 0; s < n_steps; ++s) {
        std::vector<RealField> frames = fno_forward(p, state);
        state = std::move(frames.back());
        for (double x : state.v)
            if (!std::isfinite(x))
                throw std::runtime_error("fno rollout: non-finite state at step " +
                                         std::to_string(s + 1));
        traj.times.push_back(double(s + 1) * p.cfg.h);
        traj.states.push_back(state);
    }
    return traj;
}

} // namespace chaostats
