#pragma once
#include <cstddef>

namespace chaostats::detail {

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

// gelu in the division form x / (1 + exp(-2 c (x + a x^3))): analytically equal
// to 0.5 x (1 + tanh(c (x + a x^3))) but needs one vectorizable exp, and the
// large-|x| limits fall out of exp over/underflow without branches.
//
// Both kernels stream fixed 1024-element chunks through an aligned stack
// buffer. Eigen's vectorized exp differs from scalar exp in the last ulp, and
// on unaligned data the scalar/simd split follows the pointer value; the
// bounce buffer pins that split to element indices, so results are bitwise
// reproducible for any source alignment.
void gelu_forward_inplace(double* p, size_t count);

// g *= gelu'(x)
void gelu_backward_scale(double* g, const double* x, size_t count);

} // namespace chaostats::detail
