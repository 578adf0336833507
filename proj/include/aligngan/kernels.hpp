#pragma once

#include <cstddef>
#include <span>

// Dense compute kernels behind matmul and the convolution ops.
//
// Two implementations share every signature:
//   reference::  plain loop nests, one output element at a time
//   parallel::   blocked loops, OpenMP over independent output planes/rows
// Both accumulate every output element in the same order, so their results
// are bitwise identical for any thread count (the build disables FMA
// contraction). Tests compare them exactly; bench/ times them.

namespace aligngan::kernels {

/// Geometry of a 2-D convolution x[N,C,H,W] * k[O,C,KH,KW] -> y[N,O,OH,OW].
/// A transposed convolution with kernel [Cin,Cout,KH,KW] is the adjoint of
/// the convolution with O=Cin, C=Cout.
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_h = 1, in_w = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1, kernel_w = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h() const { return (in_h + 2 * pad - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (in_w + 2 * pad - kernel_w) / stride + 1; }
  bool valid() const;
  std::size_t input_size() const { return batch * in_channels * in_h * in_w; }
  std::size_t output_size() const { return batch * out_channels * out_h() * out_w(); }
  std::size_t kernel_size() const { return out_channels * in_channels * kernel_h * kernel_w; }
};

#define ALIGNGAN_KERNEL_DECLS                                                              \
  /* c[m,n] = (accumulate ? c : 0) + op(a)[m,k] * op(b)[k,n]; a is [k,m] when trans_a, */ \
  /* b is [n,k] when trans_b. */                                                           \
  void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,      \
            std::span<const double> a, std::span<const double> b, std::span<double> c,    \
            bool accumulate);                                                              \
  void conv2d_forward(const ConvGeometry& g, std::span<const double> x,                  \
                      std::span<const double> k, std::span<double> y);                    \
  void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy,           \
                             std::span<const double> k, std::span<double> gx);            \
  void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> x,           \
                              std::span<const double> gy, std::span<double> gk);

namespace reference {
ALIGNGAN_KERNEL_DECLS
}  // namespace reference

namespace parallel {
ALIGNGAN_KERNEL_DECLS
}  // namespace parallel

#undef ALIGNGAN_KERNEL_DECLS

/// True when the parallel kernels were compiled with OpenMP.
bool openmp_enabled();
int max_threads();

// The ops dispatch here.
using parallel::conv2d_backward_input;
using parallel::conv2d_backward_kernel;
using parallel::conv2d_forward;
using parallel::gemm;

}  // namespace aligngan::kernels
