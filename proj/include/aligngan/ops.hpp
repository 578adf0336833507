#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "aligngan/autodiff.hpp"

// Differentiable op catalogue. Every op records its output in the graph of
// its first operand. Shape mismatches raise ShapeError naming the op and the
// offending shapes.
//
// Broadcasting is limited to the leading batch axis: for add/sub/mul the
// second operand may have the first operand's shape without its leading
// extent, and is then reused for every batch row.

namespace aligngan::ops {

/// a[m,k] x b[k,n].
Var matmul(Var a, Var b);

/// x[N,C,H,W] with kernel[O,C,KH,KW] -> [N,O,OH,OW], zero padding.
Var conv2d(Var x, Var kernel, std::size_t stride, std::size_t pad);

/// x[N,Cin,H,W] with kernel[Cin,Cout,KH,KW] -> [N,Cout,(H-1)*stride-2*pad+KH, ...].
/// Exact adjoint of conv2d with the same kernel.
Var transposed_conv2d(Var x, Var kernel, std::size_t stride, std::size_t pad);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
Var reshape(Var x, Shape shape);

Var leaky_relu(Var x, double slope = 0.2);
Var tanh(Var x);
Var sigmoid(Var x);
/// Natural log; every input element must be > 0 (clamp first).
Var log(Var x);
Var square(Var x);
/// Mean / sum over every element, shape {1}.
Var mean(Var x);
Var sum(Var x);
Var scale(Var x, double factor);
/// max(x, floor) elementwise.
Var clamp_min(Var x, double floor);

/// x[N,C,...] + bias[C] broadcast over the batch and spatial axes.
Var channel_bias(Var x, Var bias);

/// Training-mode batch normalization: statistics over the batch (and spatial)
/// axes per feature/channel, then gamma * xhat + beta.
Var batch_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

}  // namespace aligngan::ops
