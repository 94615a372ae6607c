#pragma once
#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace chaostats {

// Dense row-major real tensor. Complex data is stored packed: a trailing axis
// of extent 2 holding (re, im) pairs. Gradients of complex quantities follow
// the same real-pair convention throughout, so finite-difference checks are
// unambiguous.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0);
    static Tensor scalar(double x);

    size_t size() const { return v.size(); }
    int dim(int i) const { return shape[size_t(i)]; }
    double& operator[](size_t i) { return v[i]; }
    double operator[](size_t i) const { return v[i]; }
};

size_t shape_total(const std::vector<int>& s);
std::string shape_str(const std::vector<int>& s);

// Reverse-mode tape over Tensors. Nodes are appended in evaluation order
// (which is a topological order); backward walks them once in reverse.
// Re-running backward on the same tape without rebuilding is an error.
class Tape {
  public:
    using Id = int;

    Id leaf(Tensor t, bool requires_grad = false);
    const Tensor& val(Id id) const { return nodes_[size_t(id)].val; }
    const Tensor& grad(Id id) const;
    bool requires_grad(Id id) const { return nodes_[size_t(id)].req; }
    size_t n_nodes() const { return nodes_.size(); }

    // loss must be scalar (one element); populates gradients for every node
    // that transitively requires grad
    void backward(Id loss);

    // elementwise; shapes must match exactly
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);
    Id scale(Id a, double s);

    // (m,k) x (k,n) -> (m,n), or batched (m,k) x (B,k,n) -> (B,m,n)
    Id matmul(Id a, Id b);

    // per-channel bias: x's `axis` extent must match b (C); broadcast elsewhere
    Id add_channel_bias(Id x, Id b, int axis = 0);

    Id gelu(Id x);

    Id sum(Id x);   // full reduction to scalar
    Id mean(Id x);  // full reduction to scalar
    // mean over the trailing n_axes axes; result keeps the leading axes
    Id mean_trailing(Id x, int n_axes);
    Id sqrt_elem(Id x);  // elementwise; derivative at 0 defined as 0

    Id slice(Id x, int axis, int begin, int end);
    // inverse of slice: place x into a zero tensor whose `axis` has extent
    // out_extent, starting at begin
    Id embed(Id x, int axis, int begin, int out_extent);
    Id concat(const std::vector<Id>& xs, int axis);
    Id reshape(Id x, std::vector<int> shape);

    // real -> packed half spectrum over the last `rank` axes (batch leading):
    // (..., n_{rank-1}) -> (..., n_{rank-1}/2+1, 2), unnormalized
    Id rfft(Id x, int rank);
    // packed half spectrum -> real, last spatial axis size n_last. The r2c
    // edge columns (last-axis wavenumber 0 or Nyquist) are Hermitian-projected
    // first, which makes this a well-defined linear map on all inputs.
    Id irfft(Id x, int rank, int n_last);

    // packed complex x multiplied by a constant complex array, broadcast
    // cyclically over leading axes (w.size() must divide the complex count)
    Id cmul_const(Id x, std::vector<std::complex<double>> w);

    // per-mode complex channel mixing: r (M,O,C,2), x (B,C,M,2) -> (B,O,M,2)
    Id spectral_matmul(Id r, Id x);

    // periodic 1D convolution: x (B,C,n), w (O,C,K) with odd K -> (B,O,n)
    Id conv1d_periodic(Id x, Id w);

  private:
    struct Node {
        Tensor val;
        Tensor grad;
        bool req = false;
        std::function<void(Tape&)> back;
    };
    std::vector<Node> nodes_;
    bool backward_done_ = false;

    Id push(Tensor val, bool req, std::function<void(Tape&)> back);
    void accum(Id id, const double* g, size_t n);
};

// convenience wrappers in the packed representation
Tape::Id real_part(Tape& t, Tape::Id x);  // slice of the re lane
Tape::Id imag_part(Tape& t, Tape::Id x);  // slice of the im lane
Tape::Id conj_packed(Tape& t, Tape::Id x);

} // namespace chaostats
