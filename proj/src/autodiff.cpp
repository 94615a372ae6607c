#include "chaostats/autodiff.hpp"

#include "chaostats/fft.hpp"
#include "math_kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace chaostats {

using cplx = std::complex<double>;

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    v.assign(shape_total(shape), fill);
}

Tensor Tensor::scalar(double x) {
    Tensor t({1});
    t.v[0] = x;
    return t;
}

size_t shape_total(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor shape has non-positive extent " + shape_str(s));
        n *= size_t(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

// split a shape at `axis`: outer = product before, extent = shape[axis], inner = product after
void axis_split(const std::vector<int>& s, int axis, size_t& outer, int& extent, size_t& inner) {
    if (axis < 0 || axis >= int(s.size()))
        throw std::invalid_argument("axis " + std::to_string(axis) + " out of range for shape " +
                                    shape_str(s));
    outer = 1;
    inner = 1;
    for (int i = 0; i < axis; ++i) outer *= size_t(s[size_t(i)]);
    extent = s[size_t(axis)];
    for (size_t i = size_t(axis) + 1; i < s.size(); ++i) inner *= size_t(s[i]);
}

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMatRM = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// dimensions of the last `rank` axes, leading axes folded into `howmany`
struct FftDims {
    int rank = 1;
    int n[3] = {1, 1, 1};
    int howmany = 1;
    int mlast() const { return n[rank - 1] / 2 + 1; }
    size_t real_per_batch() const {
        size_t r = 1;
        for (int i = 0; i < rank; ++i) r *= size_t(n[i]);
        return r;
    }
    size_t cplx_per_batch() const { return real_per_batch() / size_t(n[rank - 1]) * size_t(mlast()); }
    // rows per batch of the packed spectrum (product over all but the halved axis)
    size_t rows() const { return cplx_per_batch() / size_t(mlast()); }
};

FftDims fft_dims_from_real(const std::vector<int>& s, int rank) {
    if (rank < 1 || rank > 3) throw std::invalid_argument("fft rank must be 1, 2 or 3");
    if (int(s.size()) < rank)
        throw std::invalid_argument("fft rank " + std::to_string(rank) +
                                    " exceeds tensor rank for shape " + shape_str(s));
    FftDims d;
    d.rank = rank;
    for (int i = 0; i < rank; ++i) d.n[i] = s[s.size() - size_t(rank) + size_t(i)];
    for (size_t i = 0; i + size_t(rank) < s.size(); ++i) d.howmany *= s[i];
    if (d.n[rank - 1] % 2 != 0)
        throw std::invalid_argument("fft last-axis extent must be even, got shape " + shape_str(s));
    return d;
}

FftDims fft_dims_from_packed(const std::vector<int>& s, int rank, int n_last) {
    if (rank < 1 || rank > 3) throw std::invalid_argument("fft rank must be 1, 2 or 3");
    if (int(s.size()) < rank + 1 || s.back() != 2)
        throw std::invalid_argument("packed spectrum must end in an axis of extent 2, got shape " +
                                    shape_str(s));
    if (n_last % 2 != 0 || n_last <= 0)
        throw std::invalid_argument("output last-axis extent must be positive and even");
    FftDims d;
    d.rank = rank;
    for (int i = 0; i + 1 < rank; ++i) d.n[i] = s[s.size() - 1 - size_t(rank) + size_t(i)];
    d.n[rank - 1] = n_last;
    if (s[s.size() - 2] != n_last / 2 + 1)
        throw std::invalid_argument("packed spectrum shape " + shape_str(s) +
                                    " does not match last-axis extent " + std::to_string(n_last));
    for (size_t i = 0; i + size_t(rank) + 1 < s.size(); ++i) d.howmany *= s[i];
    return d;
}

void run_fft_fwd(const FftDims& d, const double* in, cplx* out) {
    switch (d.rank) {
        case 1: fft_r2c_1d(d.n[0], d.howmany, in, out); break;
        case 2: fft_r2c_2d(d.n[0], d.n[1], d.howmany, in, out); break;
        default: fft_r2c_3d(d.n[0], d.n[1], d.n[2], d.howmany, in, out); break;
    }
}

void run_fft_inv(const FftDims& d, const cplx* in, double* out) {
    switch (d.rank) {
        case 1: fft_c2r_1d(d.n[0], d.howmany, in, out); break;
        case 2: fft_c2r_2d(d.n[0], d.n[1], d.howmany, in, out); break;
        default: fft_c2r_3d(d.n[0], d.n[1], d.n[2], d.howmany, in, out); break;
    }
}

// For a packed half spectrum the columns k_last = 0 and k_last = Nyquist carry
// their own conjugate partner (the row index negated over the full axes).
// hermitian_project replaces those columns by their Hermitian average, which
// both makes c2r input well defined and is exactly the self-adjoint projection
// used by the fft adjoints below.
void hermitian_project(const FftDims& d, cplx* c) {
    const int mlast = d.mlast();
    const size_t rows = d.rows();
    // row index -> mirrored row index over the non-halved axes
    auto mirror = [&](size_t r) -> size_t {
        if (d.rank == 1) return r;
        if (d.rank == 2) {
            const size_t i0 = r;
            return i0 == 0 ? 0 : size_t(d.n[0]) - i0;
        }
        const size_t i0 = r / size_t(d.n[1]);
        const size_t i1 = r % size_t(d.n[1]);
        const size_t j0 = i0 == 0 ? 0 : size_t(d.n[0]) - i0;
        const size_t j1 = i1 == 0 ? 0 : size_t(d.n[1]) - i1;
        return j0 * size_t(d.n[1]) + j1;
    };
    for (int b = 0; b < d.howmany; ++b) {
        cplx* base = c + size_t(b) * d.cplx_per_batch();
        for (int col = 0; col < mlast; col += (mlast > 1 ? mlast - 1 : 1)) {
            // col runs over {0, mlast-1}; for mlast == 1 just once
            for (size_t r = 0; r < rows; ++r) {
                const size_t rm = mirror(r);
                if (rm < r) continue;
                cplx& x = base[r * size_t(mlast) + size_t(col)];
                cplx& y = base[rm * size_t(mlast) + size_t(col)];
                const cplx avg = 0.5 * (x + std::conj(y));
                x = avg;
                y = std::conj(avg);
            }
            if (mlast == 1) break;
        }
    }
}

// scale the interior columns (0 < k_last < Nyquist) by s, in place
void scale_interior(const FftDims& d, cplx* c, double s) {
    const int mlast = d.mlast();
    const size_t rows = d.rows();
    for (int b = 0; b < d.howmany; ++b) {
        cplx* base = c + size_t(b) * d.cplx_per_batch();
        for (size_t r = 0; r < rows; ++r)
            for (int k = 1; k + 1 < mlast; ++k) base[r * size_t(mlast) + size_t(k)] *= s;
    }
}

std::vector<int> packed_shape_from_real(const std::vector<int>& s, int rank) {
    std::vector<int> out = s;
    out.back() = s.back() / 2 + 1;
    out.push_back(2);
    (void)rank;
    return out;
}

} // namespace

Tape::Id Tape::push(Tensor val, bool req, std::function<void(Tape&)> back) {
    nodes_.push_back(Node{std::move(val), Tensor{}, req, std::move(back)});
    return Id(nodes_.size() - 1);
}

void Tape::accum(Id id, const double* g, size_t n) {
    Node& node = nodes_[size_t(id)];
    if (!node.req) return;
    if (node.grad.v.empty()) {
        node.grad.shape = node.val.shape;
        node.grad.v.assign(node.val.size(), 0.0);
    }
    for (size_t i = 0; i < n; ++i) node.grad.v[i] += g[i];
}

Tape::Id Tape::leaf(Tensor t, bool requires_grad) {
    shape_total(t.shape);  // validates
    if (t.size() != shape_total(t.shape))
        throw std::invalid_argument("leaf: value size does not match shape " + shape_str(t.shape));
    return push(std::move(t), requires_grad, nullptr);
}

const Tensor& Tape::grad(Id id) const {
    const Node& n = nodes_[size_t(id)];
    if (!n.req) throw std::logic_error("grad requested for a node that does not require grad");
    if (n.grad.v.empty()) throw std::logic_error("grad requested before backward");
    return n.grad;
}

void Tape::backward(Id loss) {
    if (backward_done_)
        throw std::runtime_error("backward already ran on this tape; build a new tape");
    backward_done_ = true;
    Node& ln = nodes_[size_t(loss)];
    if (ln.val.size() != 1)
        throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                    shape_str(ln.val.shape));
    if (!ln.req) throw std::invalid_argument("backward: loss does not depend on any parameter");
    ln.grad.shape = ln.val.shape;
    ln.grad.v.assign(1, 1.0);
    for (Id i = loss; i >= 0; --i) {
        Node& n = nodes_[size_t(i)];
        if (n.back && n.req && !n.grad.v.empty()) n.back(*this);
    }
}

Tape::Id Tape::add(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require_same_shape("add", ta, tb);
    Tensor out = ta;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] += tb.v[i];
    const bool req = requires_grad(a) || requires_grad(b);
    Id self = Id(nodes_.size());
    return push(std::move(out), req, [a, b, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        t.accum(a, g.v.data(), g.size());
        t.accum(b, g.v.data(), g.size());
    });
}

Tape::Id Tape::sub(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require_same_shape("sub", ta, tb);
    Tensor out = ta;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] -= tb.v[i];
    const bool req = requires_grad(a) || requires_grad(b);
    Id self = Id(nodes_.size());
    return push(std::move(out), req, [a, b, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        t.accum(a, g.v.data(), g.size());
        std::vector<double> neg(g.size());
        for (size_t i = 0; i < g.size(); ++i) neg[i] = -g.v[i];
        t.accum(b, neg.data(), neg.size());
    });
}

Tape::Id Tape::mul(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    require_same_shape("mul", ta, tb);
    Tensor out = ta;
    for (size_t i = 0; i < out.size(); ++i) out.v[i] *= tb.v[i];
    const bool req = requires_grad(a) || requires_grad(b);
    Id self = Id(nodes_.size());
    return push(std::move(out), req, [a, b, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        std::vector<double> buf(g.size());
        const Tensor& vb = t.val(b);
        for (size_t i = 0; i < g.size(); ++i) buf[i] = g.v[i] * vb.v[i];
        t.accum(a, buf.data(), buf.size());
        const Tensor& va = t.val(a);
        for (size_t i = 0; i < g.size(); ++i) buf[i] = g.v[i] * va.v[i];
        t.accum(b, buf.data(), buf.size());
    });
}

Tape::Id Tape::scale(Id a, double s) {
    Tensor out = val(a);
    for (double& x : out.v) x *= s;
    Id self = Id(nodes_.size());
    return push(std::move(out), requires_grad(a), [a, s, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        std::vector<double> buf(g.size());
        for (size_t i = 0; i < g.size(); ++i) buf[i] = s * g.v[i];
        t.accum(a, buf.data(), buf.size());
    });
}

Tape::Id Tape::matmul(Id a, Id b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.shape.size() != 2 || (tb.shape.size() != 2 && tb.shape.size() != 3))
        throw std::invalid_argument("matmul: need (m,k) x (k,n) or (m,k) x (B,k,n), got " +
                                    shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    const int m = ta.shape[0], k = ta.shape[1];
    const int nb = tb.shape.size() == 3 ? tb.shape[0] : 1;
    const int kb = tb.shape.size() == 3 ? tb.shape[1] : tb.shape[0];
    const int n = tb.shape.size() == 3 ? tb.shape[2] : tb.shape[1];
    if (k != kb)
        throw std::invalid_argument("matmul: inner extents disagree, " + shape_str(ta.shape) +
                                    " vs " + shape_str(tb.shape));
    std::vector<int> oshape = tb.shape.size() == 3 ? std::vector<int>{nb, m, n}
                                                   : std::vector<int>{m, n};
    Tensor out(oshape);
    Eigen::Map<const MatRM> A(ta.v.data(), m, k);
    for (int bi = 0; bi < nb; ++bi) {
        Eigen::Map<const MatRM> B(tb.v.data() + size_t(bi) * size_t(k) * size_t(n), k, n);
        Eigen::Map<MatRM> O(out.v.data() + size_t(bi) * size_t(m) * size_t(n), m, n);
        O.noalias() = A * B;
    }
    const bool req = requires_grad(a) || requires_grad(b);
    Id self = Id(nodes_.size());
    return push(std::move(out), req, [a, b, m, k, n, nb, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        const Tensor& va = t.val(a);
        const Tensor& vb = t.val(b);
        // dA = sum_B g_B * B_B^T ; dB_B = A^T * g_B
        std::vector<double> da(size_t(m) * size_t(k), 0.0);
        std::vector<double> db(vb.size());
        Eigen::Map<const MatRM> A(va.v.data(), m, k);
        Eigen::Map<MatRM> DA(da.data(), m, k);
        for (int bi = 0; bi < nb; ++bi) {
            Eigen::Map<const MatRM> G(g.v.data() + size_t(bi) * size_t(m) * size_t(n), m, n);
            Eigen::Map<const MatRM> B(vb.v.data() + size_t(bi) * size_t(k) * size_t(n), k, n);
            Eigen::Map<MatRM> DB(db.data() + size_t(bi) * size_t(k) * size_t(n), k, n);
            DA.noalias() += G * B.transpose();
            DB.noalias() = A.transpose() * G;
        }
        t.accum(a, da.data(), da.size());
        t.accum(b, db.data(), db.size());
    });
}

Tape::Id Tape::add_channel_bias(Id x, Id b, int axis) {
    const Tensor& tx = val(x);
    const Tensor& tb = val(b);
    size_t outer, inner;
    int extent;
    axis_split(tx.shape, axis, outer, extent, inner);
    if (tb.shape.size() != 1 || extent != tb.shape[0])
        throw std::invalid_argument("add_channel_bias: axis " + std::to_string(axis) + " of " +
                                    shape_str(tx.shape) + " must match bias " +
                                    shape_str(tb.shape));
    const int c = extent;
    Tensor out = tx;
    for (size_t o = 0; o < outer; ++o)
        for (int i = 0; i < c; ++i) {
            double* row = out.v.data() + (o * size_t(c) + size_t(i)) * inner;
            for (size_t j = 0; j < inner; ++j) row[j] += tb.v[size_t(i)];
        }
    const bool req = requires_grad(x) || requires_grad(b);
    Id self = Id(nodes_.size());
    return push(std::move(out), req, [x, b, c, outer, inner, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        t.accum(x, g.v.data(), g.size());
        std::vector<double> db(size_t(c), 0.0);
        for (size_t o = 0; o < outer; ++o)
            for (int i = 0; i < c; ++i) {
                const double* row = g.v.data() + (o * size_t(c) + size_t(i)) * inner;
                double s = 0;
                for (size_t j = 0; j < inner; ++j) s += row[j];
                db[size_t(i)] += s;
            }
        t.accum(b, db.data(), db.size());
    });
}

Tape::Id Tape::gelu(Id x) {
    Tensor out = val(x);
    detail::gelu_forward_inplace(out.v.data(), out.v.size());
    Id self = Id(nodes_.size());
    return push(std::move(out), requires_grad(x), [x, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        const Tensor& vx = t.val(x);
        std::vector<double> buf(g.v.begin(), g.v.end());
        detail::gelu_backward_scale(buf.data(), vx.v.data(), buf.size());
        t.accum(x, buf.data(), buf.size());
    });
}

Tape::Id Tape::sum(Id x) {
    const Tensor& tx = val(x);
    double s = 0;
    for (double u : tx.v) s += u;
    Id self = Id(nodes_.size());
    const size_t n = tx.size();
    return push(Tensor::scalar(s), requires_grad(x), [x, n, self](Tape& t) {
        const double g = t.nodes_[size_t(self)].grad.v[0];
        std::vector<double> buf(n, g);
        t.accum(x, buf.data(), n);
    });
}

Tape::Id Tape::mean(Id x) {
    const size_t n = val(x).size();
    return scale(sum(x), 1.0 / double(n));
}

Tape::Id Tape::mean_trailing(Id x, int n_axes) {
    const Tensor& tx = val(x);
    if (n_axes < 1 || n_axes >= int(tx.shape.size()))
        throw std::invalid_argument("mean_trailing: cannot reduce " + std::to_string(n_axes) +
                                    " axes of shape " + shape_str(tx.shape));
    std::vector<int> oshape(tx.shape.begin(), tx.shape.end() - n_axes);
    const size_t outer = shape_total(oshape);
    const size_t inner = tx.size() / outer;
    Tensor out(oshape);
    for (size_t i = 0; i < outer; ++i) {
        const double* row = tx.v.data() + i * inner;
        double s = 0;
        for (size_t j = 0; j < inner; ++j) s += row[j];
        out.v[i] = s / double(inner);
    }
    Id self = Id(nodes_.size());
    return push(std::move(out), requires_grad(x), [x, outer, inner, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        std::vector<double> buf(outer * inner);
        for (size_t i = 0; i < outer; ++i) {
            const double gi = g.v[i] / double(inner);
            double* row = buf.data() + i * inner;
            for (size_t j = 0; j < inner; ++j) row[j] = gi;
        }
        t.accum(x, buf.data(), buf.size());
    });
}

Tape::Id Tape::sqrt_elem(Id x) {
    const Tensor& tx = val(x);
    Tensor out = tx;
    for (double& u : out.v) {
        if (u < 0)
            throw std::domain_error("sqrt_elem: negative input " + std::to_string(u));
        u = std::sqrt(u);
    }
    Id self = Id(nodes_.size());
    return push(std::move(out), requires_grad(x), [x, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        const Tensor& y = t.nodes_[size_t(self)].val;
        std::vector<double> buf(g.size());
        // derivative at 0 taken as 0 so masked-out zero norms stay inert
        for (size_t i = 0; i < g.size(); ++i)
            buf[i] = y.v[i] > 0 ? 0.5 * g.v[i] / y.v[i] : 0.0;
        t.accum(x, buf.data(), buf.size());
    });
}

Tape::Id Tape::slice(Id x, int axis, int begin, int end) {
    const Tensor& tx = val(x);
    size_t outer, inner;
    int extent;
    axis_split(tx.shape, axis, outer, extent, inner);
    if (begin < 0 || end > extent || begin >= end)
        throw std::invalid_argument("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                    ") out of range for axis " + std::to_string(axis) +
                                    " of shape " + shape_str(tx.shape));
    std::vector<int> oshape = tx.shape;
    oshape[size_t(axis)] = end - begin;
    Tensor out(oshape);
    const size_t w = size_t(end - begin) * inner;
    for (size_t o = 0; o < outer; ++o)
        std::memcpy(out.v.data() + o * w,
                    tx.v.data() + (o * size_t(extent) + size_t(begin)) * inner, w * sizeof(double));
    Id self = Id(nodes_.size());
    return push(std::move(out), requires_grad(x),
                [x, outer, extent, inner, begin, end, self](Tape& t) {
                    const Tensor& g = t.nodes_[size_t(self)].grad;
                    std::vector<double> buf(outer * size_t(extent) * inner, 0.0);
                    const size_t w = size_t(end - begin) * inner;
                    for (size_t o = 0; o < outer; ++o)
                        std::memcpy(buf.data() + (o * size_t(extent) + size_t(begin)) * inner,
                                    g.v.data() + o * w, w * sizeof(double));
                    t.accum(x, buf.data(), buf.size());
                });
}

Tape::Id Tape::embed(Id x, int axis, int begin, int out_extent) {
    const Tensor& tx = val(x);
    size_t outer, inner;
    int extent;
    axis_split(tx.shape, axis, outer, extent, inner);
    if (begin < 0 || begin + extent > out_extent)
        throw std::invalid_argument("embed at " + std::to_string(begin) + " of extent " +
                                    std::to_string(extent) + " exceeds target extent " +
                                    std::to_string(out_extent));
    std::vector<int> oshape = tx.shape;
    oshape[size_t(axis)] = out_extent;
    Tensor out(oshape);
    const size_t w = size_t(extent) * inner;
    for (size_t o = 0; o < outer; ++o)
        std::memcpy(out.v.data() + (o * size_t(out_extent) + size_t(begin)) * inner,
                    tx.v.data() + o * w, w * sizeof(double));
    Id self = Id(nodes_.size());
    return push(std::move(out), requires_grad(x),
                [x, outer, extent, inner, begin, out_extent, self](Tape& t) {
                    const Tensor& g = t.nodes_[size_t(self)].grad;
                    std::vector<double> buf(outer * size_t(extent) * inner);
                    const size_t w = size_t(extent) * inner;
                    for (size_t o = 0; o < outer; ++o)
                        std::memcpy(buf.data() + o * w,
                                    g.v.data() + (o * size_t(out_extent) + size_t(begin)) * inner,
                                    w * sizeof(double));
                    t.accum(x, buf.data(), buf.size());
                });
}

Tape::Id Tape::concat(const std::vector<Id>& xs, int axis) {
    if (xs.empty()) throw std::invalid_argument("concat: empty input list");
    const Tensor& t0 = val(xs[0]);
    size_t outer, inner;
    int extent0;
    axis_split(t0.shape, axis, outer, extent0, inner);
    int total = 0;
    for (Id id : xs) {
        const Tensor& ti = val(id);
        std::vector<int> a = t0.shape, b = ti.shape;
        a[size_t(axis)] = b[size_t(axis)] = 0;
        if (a != b)
            throw std::invalid_argument("concat: shape mismatch " + shape_str(t0.shape) + " vs " +
                                        shape_str(ti.shape));
        total += ti.shape[size_t(axis)];
    }
    std::vector<int> oshape = t0.shape;
    oshape[size_t(axis)] = total;
    Tensor out(oshape);
    std::vector<int> offsets;
    int off = 0;
    for (Id id : xs) {
        const Tensor& ti = val(id);
        const int ei = ti.shape[size_t(axis)];
        offsets.push_back(off);
        const size_t w = size_t(ei) * inner;
        for (size_t o = 0; o < outer; ++o)
            std::memcpy(out.v.data() + (o * size_t(total) + size_t(off)) * inner,
                        ti.v.data() + o * w, w * sizeof(double));
        off += ei;
    }
    bool req = false;
    for (Id id : xs) req = req || requires_grad(id);
    Id self = Id(nodes_.size());
    std::vector<Id> ids = xs;
    return push(std::move(out), req, [ids, offsets, axis, outer, inner, total, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        for (size_t p = 0; p < ids.size(); ++p) {
            const int ei = t.val(ids[p]).shape[size_t(axis)];
            std::vector<double> buf(outer * size_t(ei) * inner);
            const size_t w = size_t(ei) * inner;
            for (size_t o = 0; o < outer; ++o)
                std::memcpy(buf.data() + o * w,
                            g.v.data() + (o * size_t(total) + size_t(offsets[p])) * inner,
                            w * sizeof(double));
            t.accum(ids[p], buf.data(), buf.size());
        }
    });
}

Tape::Id Tape::reshape(Id x, std::vector<int> shape) {
    const Tensor& tx = val(x);
    if (shape_total(shape) != tx.size())
        throw std::invalid_argument("reshape: cannot view " + shape_str(tx.shape) + " as " +
                                    shape_str(shape));
    Tensor out = tx;
    out.shape = shape;
    Id self = Id(nodes_.size());
    return push(std::move(out), requires_grad(x), [x, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        t.accum(x, g.v.data(), g.size());
    });
}

Tape::Id Tape::rfft(Id x, int rank) {
    const Tensor& tx = val(x);
    const FftDims d = fft_dims_from_real(tx.shape, rank);
    Tensor out(packed_shape_from_real(tx.shape, rank));
    run_fft_fwd(d, tx.v.data(), reinterpret_cast<cplx*>(out.v.data()));
    Id self = Id(nodes_.size());
    return push(std::move(out), requires_grad(x), [x, d, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        // adjoint of r2c: halve interior columns, Hermitian-project the edge
        // columns, then c2r
        std::vector<cplx> spec(g.size() / 2);
        std::memcpy(spec.data(), g.v.data(), g.size() * sizeof(double));
        scale_interior(d, spec.data(), 0.5);
        hermitian_project(d, spec.data());
        std::vector<double> buf(size_t(d.howmany) * d.real_per_batch());
        run_fft_inv(d, spec.data(), buf.data());
        t.accum(x, buf.data(), buf.size());
    });
}

Tape::Id Tape::irfft(Id x, int rank, int n_last) {
    const Tensor& tx = val(x);
    const FftDims d = fft_dims_from_packed(tx.shape, rank, n_last);
    std::vector<cplx> spec(tx.size() / 2);
    std::memcpy(spec.data(), tx.v.data(), tx.size() * sizeof(double));
    hermitian_project(d, spec.data());
    std::vector<int> oshape(tx.shape.begin(), tx.shape.end() - 1);
    oshape.back() = n_last;
    Tensor out(oshape);
    run_fft_inv(d, spec.data(), out.v.data());
    Id self = Id(nodes_.size());
    return push(std::move(out), requires_grad(x), [x, d, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        // adjoint of (project ∘ c2r): r2c, double interior columns, project
        std::vector<cplx> spec(size_t(d.howmany) * d.cplx_per_batch());
        run_fft_fwd(d, g.v.data(), spec.data());
        scale_interior(d, spec.data(), 2.0);
        hermitian_project(d, spec.data());
        std::vector<double> buf(spec.size() * 2);
        std::memcpy(buf.data(), spec.data(), buf.size() * sizeof(double));
        t.accum(x, buf.data(), buf.size());
    });
}

Tape::Id Tape::cmul_const(Id x, std::vector<cplx> w) {
    const Tensor& tx = val(x);
    if (tx.shape.empty() || tx.shape.back() != 2)
        throw std::invalid_argument("cmul_const: expected packed complex tensor, got shape " +
                                    shape_str(tx.shape));
    const size_t nc = tx.size() / 2;
    if (w.empty() || nc % w.size() != 0)
        throw std::invalid_argument("cmul_const: multiplier length " + std::to_string(w.size()) +
                                    " does not divide complex count " + std::to_string(nc));
    Tensor out = tx;
    cplx* oc = reinterpret_cast<cplx*>(out.v.data());
    for (size_t i = 0; i < nc; ++i) oc[i] *= w[i % w.size()];
    Id self = Id(nodes_.size());
    return push(std::move(out), requires_grad(x), [x, w, nc, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        std::vector<double> buf(g.size());
        const cplx* gc = reinterpret_cast<const cplx*>(g.v.data());
        cplx* bc = reinterpret_cast<cplx*>(buf.data());
        for (size_t i = 0; i < nc; ++i) bc[i] = gc[i] * std::conj(w[i % w.size()]);
        t.accum(x, buf.data(), buf.size());
    });
}

Tape::Id Tape::spectral_matmul(Id r, Id x) {
    const Tensor& tr = val(r);
    const Tensor& tx = val(x);
    if (tr.shape.size() != 4 || tr.shape[3] != 2 || tx.shape.size() != 4 || tx.shape[3] != 2 ||
        tr.shape[0] != tx.shape[2] || tr.shape[2] != tx.shape[1])
        throw std::invalid_argument("spectral_matmul: need r (M,O,C,2) and x (B,C,M,2), got " +
                                    shape_str(tr.shape) + " vs " + shape_str(tx.shape));
    const int M = tr.shape[0], O = tr.shape[1], C = tr.shape[2], B = tx.shape[0];
    Tensor out({B, O, M, 2});
    const cplx* R = reinterpret_cast<const cplx*>(tr.v.data());
    const cplx* X = reinterpret_cast<const cplx*>(tx.v.data());
    cplx* Y = reinterpret_cast<cplx*>(out.v.data());
    using Stride = Eigen::InnerStride<Eigen::Dynamic>;
    using CVecMap = Eigen::Map<Eigen::VectorXcd, 0, Stride>;
    using CVecCMap = Eigen::Map<const Eigen::VectorXcd, 0, Stride>;
    for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m) {
            Eigen::Map<const CMatRM> Rm(R + size_t(m) * size_t(O) * size_t(C), O, C);
            CVecCMap xv(X + size_t(b) * size_t(C) * size_t(M) + size_t(m), C, Stride(M));
            CVecMap yv(Y + size_t(b) * size_t(O) * size_t(M) + size_t(m), O, Stride(M));
            yv.noalias() = Rm * xv;
        }
    const bool req = requires_grad(r) || requires_grad(x);
    Id self = Id(nodes_.size());
    return push(std::move(out), req, [r, x, M, O, C, B, self](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        const Tensor& tr = t.val(r);
        const Tensor& tx = t.val(x);
        const cplx* R = reinterpret_cast<const cplx*>(tr.v.data());
        const cplx* X = reinterpret_cast<const cplx*>(tx.v.data());
        const cplx* G = reinterpret_cast<const cplx*>(g.v.data());
        std::vector<double> dr(tr.size(), 0.0);
        std::vector<double> dx(tx.size(), 0.0);
        cplx* DR = reinterpret_cast<cplx*>(dr.data());
        cplx* DX = reinterpret_cast<cplx*>(dx.data());
        using Stride = Eigen::InnerStride<Eigen::Dynamic>;
        using CVecMap = Eigen::Map<Eigen::VectorXcd, 0, Stride>;
        using CVecCMap = Eigen::Map<const Eigen::VectorXcd, 0, Stride>;
        for (int b = 0; b < B; ++b)
            for (int m = 0; m < M; ++m) {
                Eigen::Map<const CMatRM> Rm(R + size_t(m) * size_t(O) * size_t(C), O, C);
                Eigen::Map<CMatRM> DRm(DR + size_t(m) * size_t(O) * size_t(C), O, C);
                CVecCMap xv(X + size_t(b) * size_t(C) * size_t(M) + size_t(m), C, Stride(M));
                CVecCMap gv(G + size_t(b) * size_t(O) * size_t(M) + size_t(m), O, Stride(M));
                CVecMap dxv(DX + size_t(b) * size_t(C) * size_t(M) + size_t(m), C, Stride(M));
                DRm.noalias() += gv * xv.conjugate().transpose();
                dxv.noalias() += Rm.adjoint() * gv;
            }
        t.accum(r, dr.data(), dr.size());
        t.accum(x, dx.data(), dx.size());
    });
}

Tape::Id Tape::conv1d_periodic(Id x, Id w) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    if (tx.shape.size() != 3 || tw.shape.size() != 3 || tw.shape[1] != tx.shape[1] ||
        tw.shape[2] % 2 == 0)
        throw std::invalid_argument(
            "conv1d_periodic: need x (B,C,n) and w (O,C,K) with odd K, got " +
            shape_str(tx.shape) + " vs " + shape_str(tw.shape));
    const int B = tx.shape[0], C = tx.shape[1], n = tx.shape[2];
    const int O = tw.shape[0], K = tw.shape[2], H = K / 2;
    // periodic window unroll of one batch member: rows (c,t), cols j
    auto unroll = [C, K, n, H](const double* xb, MatRM& X) {
        for (int c = 0; c < C; ++c) {
            const double* src = xb + size_t(c) * size_t(n);
            for (int t = 0; t < K; ++t) {
                const int sh = ((t - H) % n + n) % n;
                double* row = X.data() + size_t(c * K + t) * size_t(n);
                std::copy(src + sh, src + n, row);
                std::copy(src, src + sh, row + (n - sh));
            }
        }
    };
    Tensor out({B, O, n});
    {
        MatRM X(C * K, n);
        Eigen::Map<const MatRM> W(tw.v.data(), O, C * K);
        for (int b = 0; b < B; ++b) {
            unroll(tx.v.data() + size_t(b) * size_t(C) * size_t(n), X);
            Eigen::Map<MatRM> Y(out.v.data() + size_t(b) * size_t(O) * size_t(n), O, n);
            Y.noalias() = W * X;
        }
    }
    const bool req = requires_grad(x) || requires_grad(w);
    Id self = Id(nodes_.size());
    return push(std::move(out), req, [x, w, B, C, n, O, K, H, self, unroll](Tape& t) {
        const Tensor& g = t.nodes_[size_t(self)].grad;
        const Tensor& tx = t.val(x);
        const Tensor& tw = t.val(w);
        std::vector<double> dx(tx.size(), 0.0);
        Tensor dwt({O, C, K});
        Eigen::Map<const MatRM> W(tw.v.data(), O, C * K);
        Eigen::Map<MatRM> dW(dwt.v.data(), O, C * K);
        MatRM X(C * K, n), dX(C * K, n);
        for (int b = 0; b < B; ++b) {
            Eigen::Map<const MatRM> G(g.v.data() + size_t(b) * size_t(O) * size_t(n), O, n);
            unroll(tx.v.data() + size_t(b) * size_t(C) * size_t(n), X);
            dW.noalias() += G * X.transpose();
            dX.noalias() = W.transpose() * G;
            // fold the unrolled-window gradient back onto the periodic field
            double* dxb = dx.data() + size_t(b) * size_t(C) * size_t(n);
            for (int c = 0; c < C; ++c) {
                double* drow = dxb + size_t(c) * size_t(n);
                for (int tt = 0; tt < K; ++tt) {
                    const int sh = ((tt - H) % n + n) % n;
                    const double* src = dX.data() + size_t(c * K + tt) * size_t(n);
                    for (int j = 0; j < n - sh; ++j) drow[sh + j] += src[j];
                    for (int j = 0; j < sh; ++j) drow[j] += src[(n - sh) + j];
                }
            }
        }
        t.accum(x, dx.data(), dx.size());
        t.accum(w, dwt.v.data(), dwt.v.size());
    });
}

Tape::Id real_part(Tape& t, Tape::Id x) {
    const int last = int(t.val(x).shape.size()) - 1;
    return t.slice(x, last, 0, 1);
}

Tape::Id imag_part(Tape& t, Tape::Id x) {
    const int last = int(t.val(x).shape.size()) - 1;
    return t.slice(x, last, 1, 2);
}

Tape::Id conj_packed(Tape& t, Tape::Id x) {
    const Tensor& tx = t.val(x);
    if (tx.shape.empty() || tx.shape.back() != 2)
        throw std::invalid_argument("conj_packed: expected packed complex tensor, got shape " +
                                    shape_str(tx.shape));
    Tensor mask(tx.shape, 1.0);
    for (size_t i = 1; i < mask.size(); i += 2) mask.v[i] = -1.0;
    return t.mul(x, t.leaf(std::move(mask)));
}

} // namespace chaostats
