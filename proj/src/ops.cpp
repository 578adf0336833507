#include "aligngan/ops.hpp"

#include <cmath>
#include <string>

#include "aligngan/error.hpp"
#include "aligngan/kernels.hpp"

namespace aligngan::ops {
namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                   shape_str(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& why) {
  throw ShapeError(std::string(op) + ": shape " + shape_str(a) + " " + why);
}

Graph& graph_of(Var v) {
  if (v.graph == nullptr) throw Error("op on a detached Var");
  return *v.graph;
}

void same_graph(const char* op, Var a, Var b) {
  if (a.graph != b.graph) throw Error(std::string(op) + ": operands from different graphs");
}

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

// Elementwise unary op whose derivative is a function of (x, y).
template <class Fwd, class Deriv>
Var unary(OpKind kind, Var x, Fwd fwd, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = fwd(xv[i]);
  return graph_of(x).record(
      kind, {x.id}, std::move(y),
      [deriv](const Graph& g, NodeId self, const Tensor& gy, std::span<Tensor* const> gin) {
        const Tensor& xv = g.value(g.inputs(self)[0]);
        const Tensor& yv = g.value(self);
        Tensor& gx = *gin[0];
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * deriv(xv[i], yv[i]);
      });
}

enum class Broadcast { none, leading };

Broadcast broadcast_mode(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::none;
  if (a.size() >= 2 && b.size() == a.size() - 1 && std::equal(b.begin(), b.end(), a.begin() + 1))
    return Broadcast::leading;
  shape_error(op, a, b);
}

template <class Fwd, class GradA, class GradB>
Var binary(OpKind kind, Var a, Var b, Fwd fwd, GradA grad_a, GradB grad_b) {
  same_graph(op_name(kind), a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast mode = broadcast_mode(op_name(kind), av.shape(), bv.shape());
  const std::size_t inner = bv.size();
  Tensor y(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) y[i] = fwd(av[i], bv[i % inner]);
  (void)mode;
  return graph_of(a).record(
      kind, {a.id, b.id}, std::move(y),
      [grad_a, grad_b, inner](const Graph& g, NodeId self, const Tensor& gy,
                              std::span<Tensor* const> gin) {
        const Tensor& av = g.value(g.inputs(self)[0]);
        const Tensor& bv = g.value(g.inputs(self)[1]);
        if (gin[0])
          for (std::size_t i = 0; i < av.size(); ++i)
            (*gin[0])[i] += gy[i] * grad_a(av[i], bv[i % inner]);
        if (gin[1])
          for (std::size_t i = 0; i < av.size(); ++i)
            (*gin[1])[i % inner] += gy[i] * grad_b(av[i], bv[i % inner]);
      });
}

kernels::ConvGeometry conv_geometry(const char* op, const Shape& x, const Shape& k,
                                    std::size_t stride, std::size_t pad) {
  if (x.size() != 4 || k.size() != 4) shape_error(op, x, k);
  if (x[1] != k[1]) shape_error(op, x, k);
  if (stride == 0) shape_error(op, x, "with stride 0");
  kernels::ConvGeometry g{x[0], x[1], x[2], x[3], k[0], k[2], k[3], stride, pad};
  if (!g.valid()) shape_error(op, x, k);
  return g;
}

// Per-channel view of an [N,C,...] tensor: (batch, channels, spatial).
struct ChannelView {
  std::size_t batch, channels, spatial;
  std::size_t index(std::size_t n, std::size_t c, std::size_t s) const {
    return (n * channels + c) * spatial + s;
  }
};

ChannelView channel_view(const char* op, const Shape& x) {
  if (x.size() < 2) shape_error(op, x, "needs a batch and a channel axis");
  std::size_t spatial = 1;
  for (std::size_t i = 2; i < x.size(); ++i) spatial *= x[i];
  return {x[0], x[1], spatial};
}

}  // namespace

Var matmul(Var a, Var b) {
  same_graph("matmul", a, b);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) shape_error("matmul", as, bs);
  const std::size_t m = as[0], k = as[1], n = bs[1];
  Tensor y({m, n});
  kernels::gemm(false, false, m, n, k, a.value().values(), b.value().values(), y.values(), false);
  return graph_of(a).record(
      OpKind::matmul, {a.id, b.id}, std::move(y),
      [m, k, n](const Graph& g, NodeId self, const Tensor& gy, std::span<Tensor* const> gin) {
        const Tensor& av = g.value(g.inputs(self)[0]);
        const Tensor& bv = g.value(g.inputs(self)[1]);
        if (gin[0]) kernels::gemm(false, true, m, k, n, gy.values(), bv.values(), gin[0]->values(), true);
        if (gin[1]) kernels::gemm(true, false, k, n, m, av.values(), gy.values(), gin[1]->values(), true);
      });
}

Var conv2d(Var x, Var kernel, std::size_t stride, std::size_t pad) {
  same_graph("conv2d", x, kernel);
  const auto geo = conv_geometry("conv2d", x.shape(), kernel.shape(), stride, pad);
  Tensor y({geo.batch, geo.out_channels, geo.out_h(), geo.out_w()});
  kernels::conv2d_forward(geo, x.value().values(), kernel.value().values(), y.values());
  return graph_of(x).record(
      OpKind::conv2d, {x.id, kernel.id}, std::move(y),
      [geo](const Graph& g, NodeId self, const Tensor& gy, std::span<Tensor* const> gin) {
        const Tensor& xv = g.value(g.inputs(self)[0]);
        const Tensor& kv = g.value(g.inputs(self)[1]);
        if (gin[0]) {
          Tensor tmp(xv.shape());
          kernels::conv2d_backward_input(geo, gy.values(), kv.values(), tmp.values());
          accumulate(*gin[0], tmp);
        }
        if (gin[1]) {
          Tensor tmp(kv.shape());
          kernels::conv2d_backward_kernel(geo, xv.values(), gy.values(), tmp.values());
          accumulate(*gin[1], tmp);
        }
      });
}

Var transposed_conv2d(Var x, Var kernel, std::size_t stride, std::size_t pad) {
  same_graph("transposed_conv2d", x, kernel);
  const Shape& xs = x.shape();
  const Shape& ks = kernel.shape();
  if (xs.size() != 4 || ks.size() != 4 || xs[1] != ks[0] || stride == 0)
    shape_error("transposed_conv2d", xs, ks);
  const std::size_t full_h = (xs[2] - 1) * stride + ks[2];
  const std::size_t full_w = (xs[3] - 1) * stride + ks[3];
  if (full_h <= 2 * pad || full_w <= 2 * pad) shape_error("transposed_conv2d", xs, ks);
  // The convolution whose adjoint this is: input [N,Cout,OH,OW] -> [N,Cin,H,W].
  kernels::ConvGeometry geo{xs[0], ks[1], full_h - 2 * pad, full_w - 2 * pad, ks[0],
                            ks[2],  ks[3], stride,          pad};
  if (geo.out_h() != xs[2] || geo.out_w() != xs[3]) shape_error("transposed_conv2d", xs, ks);
  Tensor y({geo.batch, geo.in_channels, geo.in_h, geo.in_w});
  kernels::conv2d_backward_input(geo, x.value().values(), kernel.value().values(), y.values());
  return graph_of(x).record(
      OpKind::transposed_conv2d, {x.id, kernel.id}, std::move(y),
      [geo](const Graph& g, NodeId self, const Tensor& gy, std::span<Tensor* const> gin) {
        const Tensor& xv = g.value(g.inputs(self)[0]);
        const Tensor& kv = g.value(g.inputs(self)[1]);
        if (gin[0]) {
          Tensor tmp(xv.shape());
          kernels::conv2d_forward(geo, gy.values(), kv.values(), tmp.values());
          accumulate(*gin[0], tmp);
        }
        if (gin[1]) {
          Tensor tmp(kv.shape());
          kernels::conv2d_backward_kernel(geo, gy.values(), xv.values(), tmp.values());
          accumulate(*gin[1], tmp);
        }
      });
}

Var add(Var a, Var b) {
  return binary(
      OpKind::add, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      OpKind::sub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      OpKind::mul, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) shape_error("concat", first, "has no axis " + std::to_string(axis));
  Shape out = first;
  out[axis] = 0;
  std::vector<NodeId> ids;
  std::vector<std::size_t> extents;
  for (const Var& p : parts) {
    same_graph("concat", parts[0], p);
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_error("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != first[i]) shape_error("concat", first, s);
    out[axis] += s[axis];
    ids.push_back(p.id);
    extents.push_back(s[axis]);
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];

  Tensor y(out);
  const std::size_t row = out[axis] * inner;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& v = parts[p].value();
    const std::size_t chunk = extents[p] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(v.data() + o * chunk, chunk, y.data() + o * row + offset);
    offset += chunk;
  }
  return graph_of(parts[0]).record(
      OpKind::concat, std::move(ids), std::move(y),
      [extents, outer, inner, row](const Graph&, NodeId, const Tensor& gy,
                                   std::span<Tensor* const> gin) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < gin.size(); ++p) {
          const std::size_t chunk = extents[p] * inner;
          if (gin[p])
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t i = 0; i < chunk; ++i)
                (*gin[p])[o * chunk + i] += gy[o * row + offset + i];
          offset += chunk;
        }
      });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& xs = x.shape();
  if (axis >= xs.size() || begin >= end || end > xs[axis])
    shape_error("slice", xs,
                "cannot take [" + std::to_string(begin) + "," + std::to_string(end) +
                    ") on axis " + std::to_string(axis));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
  for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
  Shape out = xs;
  out[axis] = end - begin;
  const std::size_t in_row = xs[axis] * inner, out_row = out[axis] * inner,
                    offset = begin * inner;
  Tensor y(out);
  const Tensor& xv = x.value();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.data() + o * in_row + offset, out_row, y.data() + o * out_row);
  return graph_of(x).record(
      OpKind::slice, {x.id}, std::move(y),
      [outer, in_row, out_row, offset](const Graph&, NodeId, const Tensor& gy,
                                       std::span<Tensor* const> gin) {
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < out_row; ++i)
            (*gin[0])[o * in_row + offset + i] += gy[o * out_row + i];
      });
}

Var reshape(Var x, Shape shape) {
  if (shape_size(shape) != x.value().size()) shape_error("reshape", x.shape(), shape);
  return graph_of(x).record(OpKind::reshape, {x.id}, x.value().reshaped(std::move(shape)),
                            [](const Graph&, NodeId, const Tensor& gy,
                               std::span<Tensor* const> gin) { accumulate(*gin[0], gy); });
}

Var leaky_relu(Var x, double slope) {
  return unary(
      OpKind::leaky_relu, x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var tanh(Var x) {
  return unary(
      OpKind::tanh, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      OpKind::sigmoid, x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var log(Var x) {
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < xv.size(); ++i)
    if (!(xv[i] > 0.0))
      throw NumericError("log: non-positive input " + std::to_string(xv[i]) + " at index " +
                         std::to_string(i));
  return unary(
      OpKind::log, x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Var square(Var x) {
  return unary(
      OpKind::square, x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return graph_of(x).record(OpKind::sum, {x.id}, Tensor::scalar(s),
                            [](const Graph&, NodeId, const Tensor& gy,
                               std::span<Tensor* const> gin) {
                              for (double& g : gin[0]->values()) g += gy[0];
                            });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return graph_of(x).record(OpKind::mean, {x.id}, Tensor::scalar(s / n),
                            [n](const Graph&, NodeId, const Tensor& gy,
                                std::span<Tensor* const> gin) {
                              const double share = gy[0] / n;
                              for (double& g : gin[0]->values()) g += share;
                            });
}

Var scale(Var x, double factor) {
  return unary(
      OpKind::scale, x, [factor](double v) { return factor * v; },
      [factor](double, double) { return factor; });
}

Var clamp_min(Var x, double floor) {
  return unary(
      OpKind::clamp_min, x, [floor](double v) { return v >= floor ? v : floor; },
      [floor](double v, double) { return v >= floor ? 1.0 : 0.0; });
}

Var channel_bias(Var x, Var bias) {
  same_graph("channel_bias", x, bias);
  const ChannelView cv = channel_view("channel_bias", x.shape());
  if (bias.shape() != Shape{cv.channels}) shape_error("channel_bias", x.shape(), bias.shape());
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  Tensor y(xv.shape());
  for (std::size_t n = 0; n < cv.batch; ++n)
    for (std::size_t c = 0; c < cv.channels; ++c)
      for (std::size_t s = 0; s < cv.spatial; ++s) {
        const std::size_t i = cv.index(n, c, s);
        y[i] = xv[i] + bv[c];
      }
  return graph_of(x).record(
      OpKind::channel_bias, {x.id, bias.id}, std::move(y),
      [cv](const Graph&, NodeId, const Tensor& gy, std::span<Tensor* const> gin) {
        if (gin[0]) accumulate(*gin[0], gy);
        if (gin[1])
          for (std::size_t n = 0; n < cv.batch; ++n)
            for (std::size_t c = 0; c < cv.channels; ++c)
              for (std::size_t s = 0; s < cv.spatial; ++s) (*gin[1])[c] += gy[cv.index(n, c, s)];
      });
}

Var batch_norm(Var x, Var gamma, Var beta, double eps) {
  same_graph("batch_norm", x, gamma);
  same_graph("batch_norm", x, beta);
  const ChannelView cv = channel_view("batch_norm", x.shape());
  if (gamma.shape() != Shape{cv.channels}) shape_error("batch_norm", x.shape(), gamma.shape());
  if (beta.shape() != Shape{cv.channels}) shape_error("batch_norm", x.shape(), beta.shape());
  const double count = static_cast<double>(cv.batch * cv.spatial);
  const Tensor& xv = x.value();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();

  Tensor xhat(xv.shape());
  std::vector<double> inv_std(cv.channels);
  Tensor y(xv.shape());
  for (std::size_t c = 0; c < cv.channels; ++c) {
    double m = 0.0;
    for (std::size_t n = 0; n < cv.batch; ++n)
      for (std::size_t s = 0; s < cv.spatial; ++s) m += xv[cv.index(n, c, s)];
    m /= count;
    double var = 0.0;
    for (std::size_t n = 0; n < cv.batch; ++n)
      for (std::size_t s = 0; s < cv.spatial; ++s) {
        const double d = xv[cv.index(n, c, s)] - m;
        var += d * d;
      }
    var /= count;
    inv_std[c] = 1.0 / std::sqrt(var + eps);
    for (std::size_t n = 0; n < cv.batch; ++n)
      for (std::size_t s = 0; s < cv.spatial; ++s) {
        const std::size_t i = cv.index(n, c, s);
        xhat[i] = (xv[i] - m) * inv_std[c];
        y[i] = gv[c] * xhat[i] + bv[c];
      }
  }
  return graph_of(x).record(
      OpKind::batch_norm, {x.id, gamma.id, beta.id}, std::move(y),
      [cv, count, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          const Graph& g, NodeId self, const Tensor& gy, std::span<Tensor* const> gin) {
        const Tensor& gv = g.value(g.inputs(self)[1]);
        for (std::size_t c = 0; c < cv.channels; ++c) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t n = 0; n < cv.batch; ++n)
            for (std::size_t s = 0; s < cv.spatial; ++s) {
              const std::size_t i = cv.index(n, c, s);
              sum_g += gy[i];
              sum_gx += gy[i] * xhat[i];
            }
          if (gin[1]) (*gin[1])[c] += sum_gx;
          if (gin[2]) (*gin[2])[c] += sum_g;
          if (gin[0]) {
            const double k = gv[c] * inv_std[c] / count;
            for (std::size_t n = 0; n < cv.batch; ++n)
              for (std::size_t s = 0; s < cv.spatial; ++s) {
                const std::size_t i = cv.index(n, c, s);
                (*gin[0])[i] += k * (count * gy[i] - sum_g - xhat[i] * sum_gx);
              }
          }
        }
      });
}

}  // namespace aligngan::ops
