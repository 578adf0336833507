// Serial reference kernels. Kept deliberately naive: each output element is
// computed by its own loop in the canonical accumulation order that the
// parallel kernels reproduce.

#include <cassert>

#include "aligngan/kernels.hpp"

namespace aligngan::kernels {

bool ConvGeometry::valid() const {
  return batch > 0 && in_channels > 0 && out_channels > 0 && kernel_h > 0 && kernel_w > 0 &&
         stride > 0 && in_h + 2 * pad >= kernel_h && in_w + 2 * pad >= kernel_w;
}

namespace reference {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate) {
  assert(a.size() == m * k && b.size() == k * n && c.size() == m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = accumulate ? c[i * n + j] : 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        const double bv = trans_b ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = acc;
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> k,
                    std::span<double> y) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const auto H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
              for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const long h = static_cast<long>(i * g.stride + ki) - static_cast<long>(g.pad);
                const long w = static_cast<long>(j * g.stride + kj) - static_cast<long>(g.pad);
                if (h < 0 || h >= H || w < 0 || w >= W) continue;
                acc += x[((n * g.in_channels + c) * g.in_h + h) * g.in_w + w] *
                       k[((o * g.in_channels + c) * g.kernel_h + ki) * g.kernel_w + kj];
              }
          y[((n * g.out_channels + o) * oh + i) * ow + j] = acc;
        }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy,
                           std::span<const double> k, std::span<double> gx) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const auto s = static_cast<long>(g.stride);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (std::size_t h = 0; h < g.in_h; ++h)
        for (std::size_t w = 0; w < g.in_w; ++w) {
          double acc = 0.0;
          for (std::size_t o = 0; o < g.out_channels; ++o)
            for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
              for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const long ti = static_cast<long>(h + g.pad) - static_cast<long>(ki);
                const long tj = static_cast<long>(w + g.pad) - static_cast<long>(kj);
                if (ti < 0 || tj < 0 || ti % s != 0 || tj % s != 0) continue;
                const long i = ti / s, j = tj / s;
                if (i >= static_cast<long>(oh) || j >= static_cast<long>(ow)) continue;
                acc += gy[((n * g.out_channels + o) * oh + i) * ow + j] *
                       k[((o * g.in_channels + c) * g.kernel_h + ki) * g.kernel_w + kj];
              }
          gx[((n * g.in_channels + c) * g.in_h + h) * g.in_w + w] = acc;
        }
}

void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gk) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const auto H = static_cast<long>(g.in_h), W = static_cast<long>(g.in_w);
  for (std::size_t o = 0; o < g.out_channels; ++o)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
        for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
          double acc = 0.0;
          for (std::size_t n = 0; n < g.batch; ++n)
            for (std::size_t i = 0; i < oh; ++i)
              for (std::size_t j = 0; j < ow; ++j) {
                const long h = static_cast<long>(i * g.stride + ki) - static_cast<long>(g.pad);
                const long w = static_cast<long>(j * g.stride + kj) - static_cast<long>(g.pad);
                if (h < 0 || h >= H || w < 0 || w >= W) continue;
                acc += x[((n * g.in_channels + c) * g.in_h + h) * g.in_w + w] *
                       gy[((n * g.out_channels + o) * oh + i) * ow + j];
              }
          gk[((o * g.in_channels + c) * g.kernel_h + ki) * g.kernel_w + kj] = acc;
        }
}

}  // namespace reference
}  // namespace aligngan::kernels
