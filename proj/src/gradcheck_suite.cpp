#include <array>
#include <cmath>

#include "aligngan/gradcheck.hpp"
#include "aligngan/network.hpp"
#include "aligngan/objectives.hpp"
#include "aligngan/ops.hpp"
#include "aligngan/rng.hpp"

namespace aligngan {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Magnitudes in [margin, 1] so a central difference never straddles a kink at 0.
Tensor away_from_zero(Shape shape, Rng& rng, double margin = 0.05) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) {
    const double m = rng.uniform(margin, 1.0);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

// Weighted sum with fixed random weights, so every output element matters
// with a different coefficient.
Var project(Var y, const Tensor& w) {
  return ops::sum(ops::mul(y, y.graph->constant(w)));
}

// Up to `count` random elements whose central difference avoids every kink.
std::vector<std::size_t> sample_indices(const ScalarFn& f, const Tensor& x, std::size_t count,
                                        Rng& rng) {
  std::vector<std::size_t> out;
  for (std::size_t tries = 0; out.size() < count && tries < 8 * count; ++tries) {
    const std::size_t i = rng.below(x.size());
    if (kink_free(f, x, i, 1e-3)) out.push_back(i);
  }
  return out;
}

struct Builder {
  Rng& rng;
  std::vector<GradCase>& out;
  std::size_t rep;

  void add(std::string name, Tensor x, ScalarFn f) {
    out.push_back({name + "#" + std::to_string(rep), std::move(f), std::move(x), {}});
  }

  // Unary elementwise op, output weighted by random coefficients.
  template <class Op>
  void unary(std::string name, Tensor x, Op op) {
    const Tensor w = random_tensor(x.shape(), rng);
    add(std::move(name), std::move(x), [op, w](Graph&, Var v) { return project(op(v), w); });
  }
};

void op_cases(Builder& b) {
  Rng& rng = b.rng;
  const std::size_t r = b.rep;
  const std::size_t m = 2 + r % 3, k = 3 + r % 2, n = 2 + (r + 1) % 3;

  {
    const Tensor rhs = random_tensor({k, n}, rng), w = random_tensor({m, n}, rng);
    b.add("matmul.lhs", random_tensor({m, k}, rng), [rhs, w](Graph& g, Var x) {
      return project(ops::matmul(x, g.constant(rhs)), w);
    });
    const Tensor lhs = random_tensor({m, k}, rng);
    b.add("matmul.rhs", random_tensor({k, n}, rng), [lhs, w](Graph& g, Var x) {
      return project(ops::matmul(g.constant(lhs), x), w);
    });
  }

  {
    const std::size_t stride = 1 + r % 2, pad = r % 2 == 0 ? 0 : 1;
    const std::size_t N = 2, C = 2, H = 5, W = 4, O = 3, KH = 3, KW = 2;
    const Tensor kernel = random_tensor({O, C, KH, KW}, rng);
    const Tensor input = random_tensor({N, C, H, W}, rng);
    const std::size_t oh = (H + 2 * pad - KH) / stride + 1, ow = (W + 2 * pad - KW) / stride + 1;
    const Tensor w = random_tensor({N, O, oh, ow}, rng);
    b.add("conv2d.input", input, [kernel, w, stride, pad](Graph& g, Var x) {
      return project(ops::conv2d(x, g.constant(kernel), stride, pad), w);
    });
    b.add("conv2d.kernel", kernel, [input, w, stride, pad](Graph& g, Var x) {
      return project(ops::conv2d(g.constant(input), x, stride, pad), w);
    });
  }

  {
    const std::size_t stride = 1 + (r + 1) % 2, pad = r % 3 == 2 ? 1 : 0;
    const std::size_t N = 2, Cin = 3, H = 3, W = 2, Cout = 2, K = 3;
    const Tensor kernel = random_tensor({Cin, Cout, K, K}, rng);
    const Tensor input = random_tensor({N, Cin, H, W}, rng);
    const std::size_t oh = (H - 1) * stride + K - 2 * pad, ow = (W - 1) * stride + K - 2 * pad;
    const Tensor w = random_tensor({N, Cout, oh, ow}, rng);
    b.add("transposed_conv2d.input", input, [kernel, w, stride, pad](Graph& g, Var x) {
      return project(ops::transposed_conv2d(x, g.constant(kernel), stride, pad), w);
    });
    b.add("transposed_conv2d.kernel", kernel, [input, w, stride, pad](Graph& g, Var x) {
      return project(ops::transposed_conv2d(g.constant(input), x, stride, pad), w);
    });
  }

  {
    const Shape full{m, n}, row{n};
    const Tensor other = random_tensor(full, rng), other_row = random_tensor(row, rng);
    const Tensor w = random_tensor(full, rng);
    using Binary = Var (*)(Var, Var);
    const std::array<std::pair<const char*, Binary>, 3> ops_list{
        {{"add", ops::add}, {"sub", ops::sub}, {"mul", ops::mul}}};
    for (const auto& [name, op] : ops_list) {
      b.add(std::string(name) + ".lhs", random_tensor(full, rng), [op, other, w](Graph& g, Var x) {
        return project(op(x, g.constant(other)), w);
      });
      b.add(std::string(name) + ".rhs", random_tensor(full, rng), [op, other, w](Graph& g, Var x) {
        return project(op(g.constant(other), x), w);
      });
      b.add(std::string(name) + ".broadcast", random_tensor(row, rng),
            [op, other, w](Graph& g, Var x) { return project(op(g.constant(other), x), w); });
      b.add(std::string(name) + ".batched", random_tensor(full, rng),
            [op, other_row, w](Graph& g, Var x) { return project(op(x, g.constant(other_row)), w); });
    }
  }

  {
    const std::size_t axis = r % 2;
    const Shape xs = axis == 0 ? Shape{2, 3, 2} : Shape{2, 1 + r % 3, 2};
    const Shape ys = axis == 0 ? Shape{3, 3, 2} : Shape{2, 2, 2};
    const Tensor other = random_tensor(ys, rng);
    Shape cs = xs;
    cs[axis] += ys[axis];
    const Tensor w = random_tensor(cs, rng);
    b.add("concat", random_tensor(xs, rng), [other, w, axis](Graph& g, Var x) {
      const std::array<Var, 2> parts{g.constant(other), x};
      return project(ops::concat(parts, axis), w);
    });
    const Tensor ws = random_tensor({2, 2, 3}, rng);
    b.add("slice", random_tensor({2, 4, 3}, rng),
          [ws](Graph&, Var x) { return project(ops::slice(x, 1, 1, 3), ws); });
    const Tensor wr = random_tensor({3, 4}, rng);
    b.add("reshape", random_tensor({2, 6}, rng),
          [wr](Graph&, Var x) { return project(ops::reshape(x, {3, 4}), wr); });
  }

  b.unary("leaky_relu", away_from_zero({m, n}, rng), [](Var v) { return ops::leaky_relu(v); });
  b.unary("tanh", random_tensor({m, n}, rng), [](Var v) { return ops::tanh(v); });
  b.unary("sigmoid", random_tensor({m, n}, rng), [](Var v) { return ops::sigmoid(v); });
  b.unary("log", random_tensor({m, n}, rng, 0.2, 1.0), [](Var v) { return ops::log(v); });
  b.unary("square", random_tensor({m, n}, rng), [](Var v) { return ops::square(v); });
  b.unary("scale", random_tensor({m, n}, rng), [](Var v) { return ops::scale(v, -1.7); });
  b.unary("clamp_min", away_from_zero({m, n}, rng), [](Var v) { return ops::clamp_min(v, 0.0); });
  b.add("mean", random_tensor({m, n}, rng),
        [](Graph&, Var x) { return ops::mean(ops::square(x)); });
  b.add("sum", random_tensor({m, n}, rng),
        [](Graph&, Var x) { return ops::sum(ops::tanh(x)); });

  {
    const Tensor input = random_tensor({2, 3, 2, 2}, rng), bias = random_tensor({3}, rng);
    const Tensor w = random_tensor({2, 3, 2, 2}, rng);
    b.add("channel_bias.input", input,
          [bias, w](Graph& g, Var x) { return project(ops::channel_bias(x, g.constant(bias)), w); });
    b.add("channel_bias.bias", bias,
          [input, w](Graph& g, Var x) { return project(ops::channel_bias(g.constant(input), x), w); });
  }

  {
    const Shape s = r % 2 == 0 ? Shape{4, 3} : Shape{3, 2, 2, 2};
    const std::size_t c = s[1];
    const Tensor input = random_tensor(s, rng), gamma = random_tensor({c}, rng),
                 beta = random_tensor({c}, rng), w = random_tensor(s, rng);
    b.add("batch_norm.input", input, [gamma, beta, w](Graph& g, Var x) {
      return project(ops::batch_norm(x, g.constant(gamma), g.constant(beta)), w);
    });
    b.add("batch_norm.gamma", gamma, [input, beta, w](Graph& g, Var x) {
      return project(ops::batch_norm(g.constant(input), x, g.constant(beta)), w);
    });
    b.add("batch_norm.beta", beta, [input, gamma, w](Graph& g, Var x) {
      return project(ops::batch_norm(g.constant(input), g.constant(gamma), x), w);
    });
  }

  {
    const Tensor other = random_tensor({m}, rng);
    b.add("gan_d_loss", random_tensor({m}, rng), [other](Graph& g, Var x) {
      return gan_d_loss(ops::sigmoid(x), ops::sigmoid(g.constant(other)));
    });
    b.add("gan_g_loss", random_tensor({m}, rng),
          [](Graph&, Var x) { return gan_g_loss(ops::sigmoid(x), false); });
    b.add("gan_g_loss.saturating", random_tensor({m}, rng),
          [](Graph&, Var x) { return gan_g_loss(ops::sigmoid(x), true); });
    b.add("lsgan_d_loss", random_tensor({m}, rng),
          [other](Graph& g, Var x) { return lsgan_d_loss(g.constant(other), x); });
    b.add("lsgan_g_loss", random_tensor({m}, rng),
          [](Graph&, Var x) { return lsgan_g_loss(x); });
  }
}

// Swaps one parameter of `net` for the probed tensor and projects the output.
ScalarFn network_fn(const Network& net, std::size_t param, const Tensor& input,
                    const ConditionBatch& domain, const Tensor& w) {
  return [net, param, input, domain, w](Graph& g, Var x) {
    BoundNetwork bound{&net, {}};
    for (std::size_t i = 0; i < net.params().size(); ++i)
      bound.params.push_back(i == param ? x : g.constant(net.params()[i].value));
    return project(forward(bound, g.constant(input), domain, nullptr), w);
  };
}

void network_cases(std::vector<GradCase>& out, Rng& rng, std::uint64_t seed) {
  constexpr std::size_t batch = 2, per_tensor = 6;
  const std::array<std::size_t, batch> domains{0, 1};
  const auto codes = ConditionBatch::one_hot(ConditionKind::domain, 2, domains);

  const Network gen = build_generator(default_generator_spec(), seed);
  const Network disc = build_discriminator(default_discriminator_spec(), seed + 1);
  const Tensor z = random_tensor({batch, gen.spec().noise_dim}, rng);
  const Tensor img = random_tensor({batch, 1, 8, 8}, rng);
  const Tensor wg = random_tensor({batch, 1, 8, 8}, rng);
  const Tensor wd = random_tensor({batch}, rng);

  for (const auto* net : {&gen, &disc}) {
    const bool is_gen = net == &gen;
    const Tensor& input = is_gen ? z : img;
    const Tensor& w = is_gen ? wg : wd;
    const std::string prefix = std::string(is_gen ? "default_generator." : "default_discriminator.");
    for (std::size_t p = 0; p < net->params().size(); ++p) {
      const Tensor& value = net->params()[p].value;
      ScalarFn f = network_fn(*net, p, input, codes, w);
      auto indices = sample_indices(f, value, per_tensor, rng);
      out.push_back({prefix + net->params()[p].name, std::move(f), value, std::move(indices)});
    }
    const Network copy = *net;
    ScalarFn f = [copy, codes, w](Graph& g, Var x) {
      return project(forward(bind(g, copy, false), x, codes, nullptr), w);
    };
    auto indices = sample_indices(f, input, per_tensor, rng);
    out.push_back({prefix + "input", std::move(f), input, std::move(indices)});
  }
}

}  // namespace

std::vector<GradCase> standard_grad_cases(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCase> out;
  for (std::size_t rep = 0; rep < 4; ++rep) {
    Builder b{rng, out, rep};
    op_cases(b);
  }
  network_cases(out, rng, seed);
  return out;
}

}  // namespace aligngan
