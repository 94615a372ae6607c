#include "chaostats/fno_eval.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "chaostats/fft.hpp"
#include "math_kernels.hpp"

namespace chaostats {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMatRM = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;
using cplx = std::complex<double>;

void gelu_rows(double* p, size_t count) { detail::gelu_forward_inplace(p, count); }

// 16x16-tiled out-of-place transpose; the blocking keeps both the scattered
// writes and the strided reads inside a few pages per tile.
void transpose_tiled(const cplx* a, cplx* b, int rows, int cols) {
    constexpr int kTile = 16;
    for (int i0 = 0; i0 < rows; i0 += kTile)
        for (int j0 = 0; j0 < cols; j0 += kTile) {
            const int i1 = std::min(i0 + kTile, rows);
            const int j1 = std::min(j0 + kTile, cols);
            for (int i = i0; i < i1; ++i)
                for (int j = j0; j < j1; ++j) b[size_t(j) * rows + i] = a[size_t(i) * cols + j];
        }
}

} // namespace

FnoEvaluator::FnoEvaluator(const FnoParams& params, int batch, int n_resolution)
    : cfg_(params.cfg), B_(batch), n_(n_resolution) {
    cfg_.validate();
    if (B_ < 1) throw std::invalid_argument("fno eval: batch must be positive");
    if (n_ < 2 * cfg_.modes_kept)
        throw std::invalid_argument("fno eval: resolution " + std::to_string(n_) +
                                    " is below 2*modes_kept = " +
                                    std::to_string(2 * cfg_.modes_kept));
    T_ = cfg_.t_frames;
    w_ = cfg_.width;
    pw_ = cfg_.proj_width;
    mt_ = std::min(cfg_.modes_kept, (T_ + 1) / 2);
    rt_ = 2 * mt_ - 1;
    mk_ = cfg_.modes_kept;
    M_ = fno_mode_count(cfg_);
    mlast_ = n_ / 2 + 1;
    sites_ = cfg_.spatial_dim == 1 ? n_ : n_ * n_;
    shalf_ = cfg_.spatial_dim == 1 ? mlast_ : n_ * mlast_;
    scale_ = 1.0 / (double(T_) * double(sites_));

    if (params.tensors.size() != 6 + 3 * size_t(cfg_.n_layers))
        throw std::invalid_argument("fno eval: wrong parameter tensor count");

    // parameter copies in GEMM-ready form
    pw_mat_ = params.tensors[0].v;
    pb_ = params.tensors[1].v;
    for (int l = 0; l < cfg_.n_layers; ++l) {
        const Tensor& wt = params.tensors[2 + 3 * size_t(l)];
        const Tensor& bt = params.tensors[3 + 3 * size_t(l)];
        const Tensor& rl = params.tensors[4 + 3 * size_t(l)];
        if (wt.shape != std::vector<int>{w_, w_} ||
            rl.shape != std::vector<int>{M_, w_, w_, 2})
            throw std::invalid_argument("fno eval: layer parameter shape mismatch");
        lw_.push_back(wt.v);
        lb_.push_back(bt.v);
        // per mode the transposed complex block, so the mode mixing runs as
        // (batch x in) * (in x out) row-major GEMMs
        std::vector<cplx> blk(size_t(M_) * size_t(w_) * size_t(w_));
        for (int m = 0; m < M_; ++m)
            for (int o = 0; o < w_; ++o)
                for (int c = 0; c < w_; ++c) {
                    const size_t at = ((size_t(m) * w_ + o) * w_ + c) * 2;
                    blk[(size_t(m) * w_ + c) * w_ + o] = {rl.v[at], rl.v[at + 1]};
                }
        rblkT_.push_back(std::move(blk));
    }
    q1_ = params.tensors[params.tensors.size() - 4].v;
    b1_ = params.tensors[params.tensors.size() - 3].v;
    q2_ = params.tensors[params.tensors.size() - 2].v;
    b2_ = params.tensors[params.tensors.size() - 1].v[0];

    // retained time rows 0..mt-1 then T-mt+1..T-1, and their twiddle tables;
    // the forward 1/(T*sites) normalization rides on the forward table
    ktab_.resize(size_t(rt_));
    for (int it = 0; it < rt_; ++it) ktab_[size_t(it)] = it < mt_ ? it : T_ - mt_ + 1 + (it - mt_);
    twf_.assign(size_t(rt_) * size_t(T_), {0.0, 0.0});
    twi_.assign(size_t(T_) * size_t(rt_), {0.0, 0.0});
    for (int it = 0; it < rt_; ++it)
        for (int t = 0; t < T_; ++t) {
            const double ang = 2.0 * M_PI * double((ktab_[size_t(it)] * t) % T_) / double(T_);
            twf_[size_t(it) * T_ + t] = cplx(std::cos(ang), -std::sin(ang)) * scale_;
            twi_[size_t(t) * rt_ + it] = cplx(std::cos(ang), std::sin(ang));
        }

    const size_t bts = size_t(B_) * size_t(T_) * size_t(sites_);
    lift_in_.assign(2 * bts, 0.0);
    // the time-coordinate channel never changes between steps
    for (int b = 0; b < B_; ++b)
        for (int t = 0; t < T_; ++t) {
            double* slot = lift_in_.data() + (size_t(B_ + b) * T_ + t) * size_t(sites_);
            std::fill(slot, slot + sites_, double(t + 1) / double(T_));
        }
    v_.assign(size_t(w_) * bts, 0.0);
    wout_.assign(size_t(w_) * bts, 0.0);
    kbuf_.assign(size_t(w_) * bts, 0.0);
    // the inverse-transform input is zeroed once: every slot a layer writes is
    // overwritten every layer, and the rest (truncated modes) must stay zero
    spec_f_.assign(size_t(w_) * size_t(B_) * size_t(T_) * size_t(shalf_), {0.0, 0.0});
    spec_i_.assign(spec_f_.size(), {0.0, 0.0});
    g1_.assign(size_t(B_) * size_t(w_) * size_t(M_), {0.0, 0.0});
    g2_.assign(g1_.size(), {0.0, 0.0});
    y1_.assign(g1_.size(), {0.0, 0.0});
    y2_.assign(g1_.size(), {0.0, 0.0});
    zrow_.assign(size_t(M_), {0.0, 0.0});
    vfin_.assign(size_t(w_) * size_t(B_) * size_t(sites_), 0.0);
    p1_.assign(size_t(pw_) * size_t(B_) * size_t(sites_), 0.0);
}

namespace {

// complex axpy over interleaved re/im doubles; plain double loops vectorize
// where std::complex arithmetic does not
inline void caxset(double* z, const double* x, double ar, double ai, int count) {
    for (int i = 0; i < count; ++i) {
        const double xr = x[2 * i], xi = x[2 * i + 1];
        z[2 * i] = ar * xr - ai * xi;
        z[2 * i + 1] = ar * xi + ai * xr;
    }
}

inline void caxadd(double* z, const double* x, double ar, double ai, int count) {
    for (int i = 0; i < count; ++i) {
        const double xr = x[2 * i], xi = x[2 * i + 1];
        z[2 * i] += ar * xr - ai * xi;
        z[2 * i + 1] += ar * xi + ai * xr;
    }
}

} // namespace

// Retained coefficients of one (member, channel) chunk: spatial half-spectrum
// rows contracted against the forward time twiddles into z, ordered exactly as
// the spectral weights index modes.
void FnoEvaluator::gather_chunk(const cplx* chunk, cplx* z) const {
    const double* ch = reinterpret_cast<const double*>(chunk);
    double* zd = reinterpret_cast<double*>(z);
    if (cfg_.spatial_dim == 1) {
        for (int it = 0; it < rt_; ++it) {
            double* zr = zd + size_t(it) * size_t(2 * mk_);
            const cplx w0 = twf_[size_t(it) * T_];
            caxset(zr, ch, w0.real(), w0.imag(), mk_);
            for (int t = 1; t < T_; ++t) {
                const cplx wt = twf_[size_t(it) * T_ + t];
                caxadd(zr, ch + size_t(t) * size_t(2 * shalf_), wt.real(), wt.imag(), mk_);
            }
        }
        return;
    }
    const int r0 = 2 * mk_ - 1;
    for (int it = 0; it < rt_; ++it)
        for (int ix = 0; ix < r0; ++ix) {
            const int k0 = ix < mk_ ? ix : n_ - mk_ + 1 + (ix - mk_);
            double* zr = zd + (size_t(it) * r0 + ix) * size_t(2 * mk_);
            const cplx w0 = twf_[size_t(it) * T_];
            caxset(zr, ch + size_t(k0) * size_t(2 * mlast_), w0.real(), w0.imag(), mk_);
            for (int t = 1; t < T_; ++t) {
                const cplx wt = twf_[size_t(it) * T_ + t];
                caxadd(zr, ch + (size_t(t) * n_ + k0) * size_t(2 * mlast_), wt.real(),
                       wt.imag(), mk_);
            }
        }
}

// Hermitian projection of the mixed coefficients at the edge column (last-axis
// wavenumber 0; the Nyquist column is never populated), then expansion through
// the inverse time twiddles into the (member, channel) chunk of the inverse
// transform input. Matches the differentiable inverse transform, which
// projects the packed spectrum onto the Hermitian subspace before c2r.
void FnoEvaluator::scatter_chunk(const cplx* z_in, cplx* chunk) {
    cplx* z = zrow_.data();
    std::memcpy(z, z_in, size_t(M_) * sizeof(cplx));
    const double* zd = reinterpret_cast<const double*>(z);
    double* chd = reinterpret_cast<double*>(chunk);
    if (cfg_.spatial_dim == 1) {
        z[0] = {z[0].real(), 0.0};
        for (int it = 1; it < mt_; ++it) {
            const cplx avg = 0.5 * (z[size_t(it) * mk_] + std::conj(z[size_t(rt_ - it) * mk_]));
            z[size_t(it) * mk_] = avg;
            z[size_t(rt_ - it) * mk_] = std::conj(avg);
        }
        for (int t = 0; t < T_; ++t) {
            double* row = chd + size_t(t) * size_t(2 * shalf_);
            const cplx w0 = twi_[size_t(t) * rt_];
            caxset(row, zd, w0.real(), w0.imag(), mk_);
            for (int it = 1; it < rt_; ++it) {
                const cplx wt = twi_[size_t(t) * rt_ + it];
                caxadd(row, zd + size_t(it) * size_t(2 * mk_), wt.real(), wt.imag(), mk_);
            }
        }
        return;
    }
    const int r0 = 2 * mk_ - 1;
    for (int it = 0; it < rt_; ++it)
        for (int ix = 0; ix < r0; ++ix) {
            const int p = it * r0 + ix;
            const int itm = it == 0 ? 0 : rt_ - it;
            const int ixm = ix == 0 ? 0 : r0 - ix;
            const int pm = itm * r0 + ixm;
            if (pm < p) continue;
            cplx& a = z[size_t(p) * mk_];
            if (pm == p) {
                a = {a.real(), 0.0};
            } else {
                cplx& bz = z[size_t(pm) * mk_];
                const cplx avg = 0.5 * (a + std::conj(bz));
                a = avg;
                bz = std::conj(avg);
            }
        }
    for (int t = 0; t < T_; ++t)
        for (int ix = 0; ix < r0; ++ix) {
            const int k0 = ix < mk_ ? ix : n_ - mk_ + 1 + (ix - mk_);
            double* row = chd + (size_t(t) * n_ + k0) * size_t(2 * mlast_);
            const cplx w0 = twi_[size_t(t) * rt_];
            caxset(row, zd + size_t(ix) * size_t(2 * mk_), w0.real(), w0.imag(), mk_);
            for (int it = 1; it < rt_; ++it) {
                const cplx wt = twi_[size_t(t) * rt_ + it];
                caxadd(row, zd + (size_t(it) * r0 + ix) * size_t(2 * mk_), wt.real(),
                       wt.imag(), mk_);
            }
        }
}

void FnoEvaluator::step(const double* in, double* out) {
    const size_t bts = size_t(B_) * size_t(T_) * size_t(sites_);
    const size_t chunkc = size_t(T_) * size_t(shalf_);

    // state channel: each member's field replicated across the T time slots
    for (int b = 0; b < B_; ++b)
        for (int t = 0; t < T_; ++t)
            std::memcpy(lift_in_.data() + (size_t(b) * T_ + t) * size_t(sites_),
                        in + size_t(b) * size_t(sites_), size_t(sites_) * sizeof(double));

    // lifting
    {
        MapCM P(pw_mat_.data(), w_, 2);
        MapCM X(lift_in_.data(), 2, Eigen::Index(bts));
        MapM V(v_.data(), w_, Eigen::Index(bts));
        V.noalias() = P * X;
        for (int c = 0; c < w_; ++c) V.row(c).array() += pb_[size_t(c)];
    }

    for (int l = 0; l < cfg_.n_layers; ++l) {
        {
            MapCM W(lw_[size_t(l)].data(), w_, w_);
            MapCM V(v_.data(), w_, Eigen::Index(bts));
            MapM Y(wout_.data(), w_, Eigen::Index(bts));
            Y.noalias() = W * V;
        }
        // spatial transform only; the short time axis is contracted by hand
        if (cfg_.spatial_dim == 1)
            fft_r2c_1d(n_, w_ * B_ * T_, v_.data(), spec_f_.data());
        else
            fft_r2c_2d(n_, n_, w_ * B_ * T_, v_.data(), spec_f_.data());

        // gather: retained coefficients of every (member, channel) chunk, laid
        // out chunk-major so the per-chunk writes stay contiguous
        for (int b = 0; b < B_; ++b)
            for (int c = 0; c < w_; ++c)
                gather_chunk(spec_f_.data() + (size_t(c) * B_ + b) * chunkc,
                             g1_.data() + (size_t(b) * w_ + c) * size_t(M_));
        transpose_tiled(g1_.data(), g2_.data(), B_ * w_, M_);
        // per-mode mixing on the mode-major layout: (B*w) x 1 slices regroup
        // as (B x w_in) blocks, times the transposed weight block
        {
            const std::vector<cplx>& blk = rblkT_[size_t(l)];
            const size_t bw = size_t(B_) * size_t(w_);
            for (int m = 0; m < M_; ++m) {
                Eigen::Map<const CMatRM> G(g2_.data() + size_t(m) * bw, B_, w_);
                Eigen::Map<const CMatRM> R(blk.data() + size_t(m) * size_t(w_) * size_t(w_),
                                           w_, w_);
                Eigen::Map<CMatRM> Y(y2_.data() + size_t(m) * bw, B_, w_);
                Y.noalias() = G * R;
            }
        }
        transpose_tiled(y2_.data(), y1_.data(), M_, B_ * w_);
        // scatter back into the zero-padded inverse-transform input
        for (int b = 0; b < B_; ++b)
            for (int c = 0; c < w_; ++c)
                scatter_chunk(y1_.data() + (size_t(b) * w_ + c) * size_t(M_),
                              spec_i_.data() + (size_t(c) * B_ + b) * chunkc);
        if (cfg_.spatial_dim == 1)
            fft_c2r_1d(n_, w_ * B_ * T_, spec_i_.data(), kbuf_.data());
        else
            fft_c2r_2d(n_, n_, w_ * B_ * T_, spec_i_.data(), kbuf_.data());

        const bool act = l + 1 < cfg_.n_layers;
        for (int c = 0; c < w_; ++c) {
            Eigen::Map<Eigen::ArrayXd> R(v_.data() + size_t(c) * bts, Eigen::Index(bts));
            Eigen::Map<const Eigen::ArrayXd> Wr(wout_.data() + size_t(c) * bts,
                                                Eigen::Index(bts));
            Eigen::Map<const Eigen::ArrayXd> Kr(kbuf_.data() + size_t(c) * bts,
                                                Eigen::Index(bts));
            const double bias = lb_[size_t(l)][size_t(c)];
            R = Wr + Kr + bias;
            if (act) detail::gelu_forward_inplace(v_.data() + size_t(c) * bts, bts);
        }
    }

    // projection, final time slot only (the composite-step output)
    const size_t bs = size_t(B_) * size_t(sites_);
    for (int c = 0; c < w_; ++c)
        for (int b = 0; b < B_; ++b)
            std::memcpy(vfin_.data() + (size_t(c) * B_ + b) * size_t(sites_),
                        v_.data() + ((size_t(c) * B_ + b) * T_ + (T_ - 1)) * size_t(sites_),
                        size_t(sites_) * sizeof(double));
    {
        MapCM Q1(q1_.data(), pw_, w_);
        MapCM V(vfin_.data(), w_, Eigen::Index(bs));
        MapM P1(p1_.data(), pw_, Eigen::Index(bs));
        P1.noalias() = Q1 * V;
        for (int c = 0; c < pw_; ++c) P1.row(c).array() += b1_[size_t(c)];
    }
    gelu_rows(p1_.data(), size_t(pw_) * bs);
    {
        MapCM Q2(q2_.data(), 1, pw_);
        MapCM P1(p1_.data(), pw_, Eigen::Index(bs));
        MapM O(out, 1, Eigen::Index(bs));
        O.noalias() = Q2 * P1;
        O.array() += b2_;
    }
}

void FnoEvaluator::step_fields(const std::vector<const RealField*>& in,
                               std::vector<RealField>& out) {
    if (int(in.size()) != B_)
        throw std::invalid_argument("fno eval: expected a batch of " + std::to_string(B_) +
                                    " fields, got " + std::to_string(in.size()));
    const GridSpec g = in[0]->grid;
    if (g.dim != cfg_.spatial_dim || g.n != n_)
        throw std::invalid_argument("fno eval: field grid does not match the bound geometry");
    std::vector<double> buf(size_t(B_) * size_t(sites_));
    for (int b = 0; b < B_; ++b) {
        if (in[size_t(b)]->grid != g)
            throw std::invalid_argument("fno eval: batch members live on different grids");
        std::copy(in[size_t(b)]->v.begin(), in[size_t(b)]->v.end(),
                  buf.begin() + size_t(b) * size_t(sites_));
    }
    step(buf.data(), buf.data());
    out.clear();
    out.reserve(size_t(B_));
    for (int b = 0; b < B_; ++b) {
        RealField f(g);
        std::copy(buf.begin() + size_t(b) * size_t(sites_),
                  buf.begin() + size_t(b + 1) * size_t(sites_), f.v.begin());
        out.push_back(std::move(f));
    }
}

std::vector<Trajectory> fno_eval_rollout(const FnoParams& params,
                                         const std::vector<RealField>& v0, int n_steps) {
    if (v0.empty()) throw std::invalid_argument("fno rollout: empty batch");
    if (n_steps < 1) throw std::invalid_argument("fno rollout: n_steps must be at least 1");
    const GridSpec g = v0[0].grid;
    for (const RealField& f : v0)
        if (f.grid != g)
            throw std::invalid_argument("fno rollout: batch members live on different grids");
    const int B = int(v0.size());
    const size_t sites = v0[0].v.size();
    FnoEvaluator ev(params, B, g.n);

    std::vector<double> state(size_t(B) * sites);
    for (int b = 0; b < B; ++b)
        std::copy(v0[size_t(b)].v.begin(), v0[size_t(b)].v.end(),
                  state.begin() + size_t(b) * sites);

    std::vector<Trajectory> out(size_t(B), Trajectory{g, Provenance::fno_rollout, {}, {}});
    for (Trajectory& t : out) {
        t.times.reserve(size_t(n_steps));
        t.states.reserve(size_t(n_steps));
    }
    for (int s = 0; s < n_steps; ++s) {
        ev.step(state.data(), state.data());
        for (int b = 0; b < B; ++b) {
            const double* p = state.data() + size_t(b) * sites;
            for (size_t i = 0; i < sites; ++i)
                if (!std::isfinite(p[i]))
                    throw std::runtime_error("fno rollout: non-finite state at step " +
                                             std::to_string(s + 1) + " (member " +
                                             std::to_string(b) + ")");
            RealField f(g);
            std::copy(p, p + sites, f.v.begin());
            out[size_t(b)].times.push_back(double(s + 1) * params.cfg.h);
            out[size_t(b)].states.push_back(std::move(f));
        }
    }
    return out;
}

} // namespace chaostats
