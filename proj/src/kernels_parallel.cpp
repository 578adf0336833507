// OpenMP kernels. Work is split over independent output rows/planes only;
// each output element is still accumulated by one thread in the canonical
// order of reference::, which keeps results bitwise identical.

#include <algorithm>
#include <cassert>
#include <vector>

#include "aligngan/kernels.hpp"

#ifdef ALIGNGAN_HAS_OPENMP
#include <omp.h>
#endif

namespace aligngan::kernels {

bool openmp_enabled() {
#ifdef ALIGNGAN_HAS_OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef ALIGNGAN_HAS_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {
namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1u << 15;

struct Range {
  std::size_t lo = 0, hi = 0;
};

// Output positions i in [0, out) with 0 <= i*stride + offset - pad < in.
Range valid_range(std::size_t out, std::size_t in, std::size_t offset, std::size_t stride,
                  std::size_t pad) {
  Range r;
  r.lo = offset >= pad ? 0 : (pad - offset + stride - 1) / stride;
  if (in + pad <= offset) return {0, 0};
  r.hi = std::min(out, (in - 1 + pad - offset) / stride + 1);
  if (r.lo > r.hi) r.lo = r.hi;
  return r;
}

// One kernel offset with the output rows/columns it touches, kernel-major order.
struct Tap {
  std::size_t ki, kj;
  Range rows, cols;
};

std::vector<Tap> taps(const ConvGeometry& g) {
  std::vector<Tap> out;
  out.reserve(g.kernel_h * g.kernel_w);
  for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
    const Range ri = valid_range(g.out_h(), g.in_h, ki, g.stride, g.pad);
    for (std::size_t kj = 0; kj < g.kernel_w; ++kj)
      out.push_back({ki, kj, ri, valid_range(g.out_w(), g.in_w, kj, g.stride, g.pad)});
  }
  return out;
}

// c[m,n] = a[m,k] * b[k,n], each c element summed over p in order.
void gemm_serial(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                 double* c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// col[(c,ki,kj), (i,j)] = x[c, i*stride+ki-pad, j*stride+kj-pad], zero outside.
void im2col(const ConvGeometry& g, const std::vector<Tap>& table, const double* x, double* col) {
  const std::size_t oh = g.out_h(), ow = g.out_w(), q = oh * ow, taps = table.size();
  std::fill(col, col + g.in_channels * taps * q, 0.0);
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const double* xp = x + c * g.in_h * g.in_w;
    for (std::size_t t = 0; t < taps; ++t) {
      const Tap& tp = table[t];
      double* row = col + (c * taps + t) * q;
      for (std::size_t i = tp.rows.lo; i < tp.rows.hi; ++i) {
        const double* xrow = xp + (i * g.stride + tp.ki - g.pad) * g.in_w;
        for (std::size_t j = tp.cols.lo; j < tp.cols.hi; ++j)
          row[i * ow + j] = xrow[j * g.stride + tp.kj - g.pad];
      }
    }
  }
}

}  // namespace

// Matrix products run row-parallel. The conv kernels lower to matrix products
// over im2col buffers. Every output element is still a single running sum over
// the same terms in the same order as the reference loops; out-of-bounds taps
// contribute an exact zero instead of being skipped, which leaves finite sums
// bit-identical.

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate) {
  assert(a.size() == m * k && b.size() == k * n && c.size() == m * n);
  const double* A = a.data();
  // A transposed copy of b keeps the inner loop contiguous; each c element
  // is still summed over p in order.
  std::vector<double> bt;
  if (trans_b) {
    bt.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  const double* B = trans_b ? bt.data() : b.data();
  double* C = c.data();
  [[maybe_unused]] const bool big = m * n * k >= kParallelWork && m > 1;
#ifdef ALIGNGAN_HAS_OPENMP
#pragma omp parallel for schedule(static) if (big)
#endif
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = C + i * n;
    if (!accumulate) std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? A[p * m + i] : A[i * k + p];
      const double* bp = B + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> x, std::span<const double> k,
                    std::span<double> y) {
  const std::size_t q = g.out_h() * g.out_w();
  const std::size_t p = g.in_channels * g.kernel_h * g.kernel_w;
  const std::vector<Tap> table = taps(g);
  [[maybe_unused]] const bool big = g.output_size() * p >= kParallelWork && g.batch > 1;
#ifdef ALIGNGAN_HAS_OPENMP
#pragma omp parallel if (big)
#endif
  {
    std::vector<double> col(p * q);
#ifdef ALIGNGAN_HAS_OPENMP
#pragma omp for schedule(static)
#endif
    for (std::size_t n = 0; n < g.batch; ++n) {
      im2col(g, table, x.data() + n * g.in_channels * g.in_h * g.in_w, col.data());
      gemm_serial(g.out_channels, q, p, k.data(), col.data(), y.data() + n * g.out_channels * q,
                  false);
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, std::span<const double> gy,
                           std::span<const double> k, std::span<double> gx) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const std::size_t kk = g.kernel_h * g.kernel_w;
  const std::size_t p = g.out_channels * kk;  // (o,ki,kj), the reference gather order
  const std::size_t qin = g.in_h * g.in_w;
  // kt[c, (o,ki,kj)] = k[o, c, ki, kj]
  std::vector<double> kt(g.in_channels * p);
  for (std::size_t o = 0; o < g.out_channels; ++o)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      std::copy_n(k.data() + (o * g.in_channels + c) * kk, kk, kt.data() + c * p + o * kk);
  const std::vector<Tap> table = taps(g);
  [[maybe_unused]] const bool big = g.input_size() * p >= kParallelWork && g.batch > 1;
#ifdef ALIGNGAN_HAS_OPENMP
#pragma omp parallel if (big)
#endif
  {
    // col[(o,ki,kj), (r,s)] = gy[o, i, j] where r = i*stride+ki-pad, s = j*stride+kj-pad.
    std::vector<double> col(p * qin);
#ifdef ALIGNGAN_HAS_OPENMP
#pragma omp for schedule(static)
#endif
    for (std::size_t n = 0; n < g.batch; ++n) {
      std::fill(col.begin(), col.end(), 0.0);
      for (std::size_t o = 0; o < g.out_channels; ++o) {
        const double* gyp = gy.data() + (n * g.out_channels + o) * oh * ow;
        for (std::size_t t = 0; t < table.size(); ++t) {
          const Tap& tp = table[t];
          double* row = col.data() + (o * kk + t) * qin;
          for (std::size_t i = tp.rows.lo; i < tp.rows.hi; ++i) {
            double* rrow = row + (i * g.stride + tp.ki - g.pad) * g.in_w;
            for (std::size_t j = tp.cols.lo; j < tp.cols.hi; ++j)
              rrow[j * g.stride + tp.kj - g.pad] = gyp[i * ow + j];
          }
        }
      }
      gemm_serial(g.in_channels, qin, p, kt.data(), col.data(),
                  gx.data() + n * g.in_channels * qin, false);
    }
  }
}

void conv2d_backward_kernel(const ConvGeometry& g, std::span<const double> x,
                            std::span<const double> gy, std::span<double> gk) {
  const std::size_t q = g.out_h() * g.out_w();
  const std::size_t p = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t nq = g.batch * q;
  const std::vector<Tap> table = taps(g);
  // a[o, (n,i,j)] = gy[n, o, i, j]; b[(n,i,j), (c,ki,kj)] = im2col(x[n]) transposed.
  std::vector<double> a(g.out_channels * nq), b(nq * p), col(p * q);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_channels; ++o)
      std::copy_n(gy.data() + (n * g.out_channels + o) * q, q, a.data() + o * nq + n * q);
    im2col(g, table, x.data() + n * g.in_channels * g.in_h * g.in_w, col.data());
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t j = 0; j < q; ++j) b[(n * q + j) * p + r] = col[r * q + j];
  }
  [[maybe_unused]] const bool big = g.out_channels * nq * p >= kParallelWork;
#ifdef ALIGNGAN_HAS_OPENMP
#pragma omp parallel for schedule(static) if (big)
#endif
  for (std::size_t o = 0; o < g.out_channels; ++o)
    gemm_serial(1, p, nq, a.data() + o * nq, b.data(), gk.data() + o * p, false);
}

}  // namespace parallel
}  // namespace aligngan::kernels
