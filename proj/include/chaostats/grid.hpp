#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace chaostats {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Uniform periodic grid on [0,length)^dim, dim is 1 or 2, n points per axis.
struct GridSpec {
    int dim = 1;
    int n = 0;          // points per axis, power of two
    double length = 0;  // domain edge length

    GridSpec() = default;
    GridSpec(int dim_, int n_, double length_) : dim(dim_), n(n_), length(length_) {
        if (dim != 1 && dim != 2) throw std::invalid_argument("GridSpec: dim must be 1 or 2");
        if (!is_pow2(n)) throw std::invalid_argument("GridSpec: n must be a power of two, got " + std::to_string(n_));
        if (!(length > 0)) throw std::invalid_argument("GridSpec: length must be positive");
    }

    double dx() const { return length / n; }
    size_t total() const { return dim == 1 ? size_t(n) : size_t(n) * n; }
    int nyquist() const { return n / 2; }
    int dealias_cutoff() const { return n / 3; }  // 2/3 rule: keep |k| <= n/3

    // physical coordinate of point j along one axis
    double x(int j) const { return length * j / n; }

    // signed integer wavenumber for storage index i along one axis: 0..n/2,-n/2+1..-1
    int wavenum(int i) const { return i <= n / 2 ? i : i - n; }

    // angular wavenumber 2*pi*k/length
    double q(int k) const { return 6.283185307179586476925286766559 * k / length; }

    bool operator==(const GridSpec& o) const { return dim == o.dim && n == o.n && length == o.length; }
    bool operator!=(const GridSpec& o) const { return !(*this == o); }
};

// Spectral truncation filter: keep modes with |k|_inf <= cutoff, represented on
// a (possibly different) target grid. The projection is orthogonal, so applying
// it twice equals applying it once, and <Fu, v> == <u, Fv> on the same grid.
struct FilterSpec {
    int cutoff = 0;       // retained band
    GridSpec target;      // grid the filtered field lives on

    FilterSpec() = default;
    FilterSpec(int cutoff_, GridSpec target_) : cutoff(cutoff_), target(target_) {
        if (cutoff < 1) throw std::invalid_argument("FilterSpec: cutoff must be >= 1");
        if (cutoff > target.nyquist()) throw std::invalid_argument("FilterSpec: cutoff exceeds target Nyquist");
    }
};

} // namespace chaostats
