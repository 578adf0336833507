#include "aligngan/network.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "aligngan/error.hpp"
#include "aligngan/ops.hpp"
#include "aligngan/rng.hpp"
#include "aligngan/text.hpp"

namespace aligngan {

const char* role_name(NetworkRole role) {
  return role == NetworkRole::generator ? "generator" : "discriminator";
}

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::transposed_conv: return "tconv";
  }
  return "?";
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::none: return "none";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

std::string where(const NetworkSpec& spec, std::size_t layer) {
  return std::string(role_name(spec.role)) + " layer " + std::to_string(layer);
}

std::size_t weight_fan_in(const LayerSpec& l, const LayerPlan& p) {
  return l.kind == LayerKind::dense ? p.fan_in : p.fan_in * l.kernel * l.kernel;
}

Shape weight_shape(const LayerSpec& l, const LayerPlan& p) {
  switch (l.kind) {
    case LayerKind::dense: return {p.fan_in, l.width};
    case LayerKind::conv: return {l.width, p.fan_in, l.kernel, l.kernel};
    case LayerKind::transposed_conv: return {p.fan_in, l.width, l.kernel, l.kernel};
  }
  return {};
}

Network build(const NetworkSpec& spec, NetworkRole role, std::uint64_t seed) {
  if (spec.role != role)
    throw SpecError(std::string("expected a ") + role_name(role) + " spec, got a " +
                    role_name(spec.role) + " spec");
  const auto plan = plan_network(spec);
  Rng rng(seed);
  std::vector<Parameter> params;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string prefix = "layer" + std::to_string(i) + ".";
    Tensor w(weight_shape(l, plan[i]));
    const double s = 1.0 / std::sqrt(static_cast<double>(weight_fan_in(l, plan[i])));
    for (double& v : w.values()) v = rng.uniform(-s, s);
    params.push_back({prefix + "weight", std::move(w)});
    params.push_back({prefix + "bias", Tensor({l.width}, 0.0)});
    if (l.batch_norm) {
      params.push_back({prefix + "gamma", Tensor({l.width}, 1.0)});
      params.push_back({prefix + "beta", Tensor({l.width}, 0.0)});
    }
  }
  return Network(spec, std::move(params));
}

Var activate(Var x, Activation a, double slope) {
  switch (a) {
    case Activation::none: return x;
    case Activation::leaky_relu: return ops::leaky_relu(x, slope);
    case Activation::tanh: return ops::tanh(x);
    case Activation::sigmoid: return ops::sigmoid(x);
  }
  return x;
}

void check_codes(const NetworkSpec& spec, const ConditionBatch& codes, std::size_t rows,
                 std::size_t width, ConditionKind kind) {
  if (codes.kind() != kind)
    throw SpecError(std::string(role_name(spec.role)) + ": expected " + condition_kind_name(kind) +
                    " codes, got " + condition_kind_name(codes.kind()) + " codes");
  if (codes.rows() != rows || codes.width() != width)
    throw ShapeError(std::string(role_name(spec.role)) + ": " + condition_kind_name(kind) +
                     " codes are " + std::to_string(codes.rows()) + "x" +
                     std::to_string(codes.width()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(width));
}

}  // namespace

std::vector<LayerPlan> plan_network(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw SpecError(std::string(role_name(spec.role)) + " has no layers");
  if (spec.domain_count < 2)
    throw SpecError("domain_count must be at least 2, got " + std::to_string(spec.domain_count));
  if (!std::isfinite(spec.leaky_slope)) throw SpecError("leaky_slope must be finite");
  if (spec.sample_shape.empty() || shape_size(spec.sample_shape) == 0 ||
      (spec.sample_shape.size() != 1 && spec.sample_shape.size() != 3))
    throw SpecError("sample_shape must be {F} or {C,H,W}, got " + shape_str(spec.sample_shape));

  Shape cur;
  if (spec.role == NetworkRole::generator) {
    if (spec.noise_dim == 0) throw SpecError("generator noise_dim must be positive");
    cur = {spec.noise_dim};
  } else {
    cur = spec.sample_shape;
  }

  std::vector<LayerPlan> plan;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.width == 0) throw SpecError(where(spec, i) + ": width must be positive");
    if (l.inject_domain && l.inject_label)
      throw SpecError(where(spec, i) +
                      ": a layer cannot consume both the domain and the label code "
                      "(domain and label sites must be disjoint)");
    if (l.inject_label && spec.label_count == 0)
      throw SpecError(where(spec, i) + ": label site declared but label_count is 0");
    if (i == 0 && spec.role == NetworkRole::generator && l.inject_domain)
      throw SpecError(where(spec, i) +
                      ": AlignGAN rule 1 violated: the generator's noise-input layer must not be "
                      "conditioned on the domain code");
    if (i == 0 && spec.role == NetworkRole::discriminator && !l.inject_domain)
      throw SpecError(where(spec, i) +
                      ": AlignGAN rule 2 violated: the discriminator's image-input layer must be "
                      "conditioned on the domain code");

    const std::size_t injected = (l.inject_domain ? spec.domain_count : 0) +
                                 (l.inject_label ? spec.label_count : 0);
    LayerPlan p{cur, 0, {}};
    if (l.kind == LayerKind::dense) {
      p.fan_in = shape_size(cur) + injected;
      p.output = {l.width};
      if (!l.reshape_to.empty()) {
        if (l.reshape_to.size() != 3 || shape_size(l.reshape_to) != l.width)
          throw SpecError(where(spec, i) + ": reshape_to " + shape_str(l.reshape_to) +
                          " does not hold " + std::to_string(l.width) + " units as {C,H,W}");
        p.output = l.reshape_to;
      }
    } else {
      if (cur.size() != 3)
        throw SpecError(where(spec, i) + ": " + kind_name(l.kind) +
                        " needs a {C,H,W} input, got " + shape_str(cur) +
                        " (give the previous dense layer a reshape)");
      if (!l.reshape_to.empty()) throw SpecError(where(spec, i) + ": reshape is for dense layers");
      if (l.kernel == 0 || l.stride == 0)
        throw SpecError(where(spec, i) + ": kernel and stride must be positive");
      p.fan_in = cur[0] + injected;
      std::size_t h = 0, w = 0;
      if (l.kind == LayerKind::conv) {
        if (cur[1] + 2 * l.pad < l.kernel || cur[2] + 2 * l.pad < l.kernel)
          throw SpecError(where(spec, i) + ": kernel larger than padded input");
        h = (cur[1] + 2 * l.pad - l.kernel) / l.stride + 1;
        w = (cur[2] + 2 * l.pad - l.kernel) / l.stride + 1;
      } else {
        const std::size_t fh = (cur[1] - 1) * l.stride + l.kernel;
        const std::size_t fw = (cur[2] - 1) * l.stride + l.kernel;
        if (fh <= 2 * l.pad || fw <= 2 * l.pad)
          throw SpecError(where(spec, i) + ": padding swallows the transposed-conv output");
        h = fh - 2 * l.pad;
        w = fw - 2 * l.pad;
      }
      p.output = {l.width, h, w};
    }
    cur = p.output;
    plan.push_back(std::move(p));
  }

  const LayerSpec& last = spec.layers.back();
  if (spec.role == NetworkRole::generator) {
    if (cur != spec.sample_shape)
      throw SpecError("generator emits " + shape_str(cur) + " but sample_shape is " +
                      shape_str(spec.sample_shape));
    if (last.activation != Activation::tanh)
      throw SpecError("generator output layer must use tanh (samples live in [-1,1])");
  } else {
    if (last.kind != LayerKind::dense || last.width != 1)
      throw SpecError("discriminator must end in a dense layer with one unit");
    if (last.activation != Activation::none)
      throw SpecError("discriminator output layer must be linear; the objective adds any squashing");
  }
  return plan;
}

Network::Network(NetworkSpec spec, std::vector<Parameter> params)
    : spec_(std::move(spec)), plan_(plan_network(spec_)), params_(std::move(params)) {
  std::size_t expected = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const Shape want[] = {weight_shape(l, plan_[i]), Shape{l.width}, Shape{l.width},
                          Shape{l.width}};
    const std::size_t n = l.batch_norm ? 4 : 2;
    for (std::size_t j = 0; j < n; ++j, ++expected) {
      if (expected >= params_.size())
        throw SpecError("network is missing parameters for layer " + std::to_string(i));
      if (params_[expected].value.shape() != want[j])
        throw SpecError("parameter " + params_[expected].name + " has shape " +
                        shape_str(params_[expected].value.shape()) + ", expected " +
                        shape_str(want[j]));
    }
  }
  if (expected != params_.size()) throw SpecError("network has surplus parameters");
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool operator==(const Network& a, const Network& b) {
  if (!(a.spec_ == b.spec_) || a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i)
    if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value))
      return false;
  return true;
}

Network build_generator(const NetworkSpec& spec, std::uint64_t seed) {
  return build(spec, NetworkRole::generator, seed);
}

Network build_discriminator(const NetworkSpec& spec, std::uint64_t seed) {
  return build(spec, NetworkRole::discriminator, seed);
}

BoundNetwork bind(Graph& graph, const Network& net, bool trainable) {
  BoundNetwork b{&net, {}};
  b.params.reserve(net.params().size());
  for (const auto& p : net.params())
    b.params.push_back(trainable ? graph.leaf(p.value, p.name) : graph.constant(p.value));
  return b;
}

Var forward(const BoundNetwork& bound, Var input, const ConditionBatch& domain,
            const ConditionBatch* label) {
  const Network& net = *bound.net;
  const NetworkSpec& spec = net.spec();
  const Shape& in = input.shape();
  Shape expect_tail = spec.role == NetworkRole::generator ? Shape{spec.noise_dim} : spec.sample_shape;
  if (in.size() != expect_tail.size() + 1 || !std::equal(expect_tail.begin(), expect_tail.end(), in.begin() + 1))
    throw ShapeError(std::string(role_name(spec.role)) + ": input " + shape_str(in) +
                     " does not match per-sample shape " + shape_str(expect_tail));
  const std::size_t n = in[0];
  check_codes(spec, domain, n, spec.domain_count, ConditionKind::domain);
  bool needs_label = false;
  for (const auto& l : spec.layers) needs_label = needs_label || l.inject_label;
  if (needs_label && label == nullptr)
    throw SpecError(std::string(role_name(spec.role)) +
                    " has label sites but no label code was supplied");
  if (label) check_codes(spec, *label, n, spec.label_count, ConditionKind::label);

  Var a = input;
  std::size_t pi = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.kind == LayerKind::dense && a.shape().size() != 2)
      a = ops::reshape(a, {n, shape_size(a.shape()) / n});
    if (l.inject_domain) a = condition_inject(a, domain);
    if (l.inject_label) a = condition_inject(a, *label);
    const Var w = bound.params[pi++];
    const Var b = bound.params[pi++];
    switch (l.kind) {
      case LayerKind::dense: a = ops::add(ops::matmul(a, w), b); break;
      case LayerKind::conv: a = ops::channel_bias(ops::conv2d(a, w, l.stride, l.pad), b); break;
      case LayerKind::transposed_conv:
        a = ops::channel_bias(ops::transposed_conv2d(a, w, l.stride, l.pad), b);
        break;
    }
    if (l.batch_norm) {
      const Var gamma = bound.params[pi++];
      const Var beta = bound.params[pi++];
      a = ops::batch_norm(a, gamma, beta);
    }
    a = activate(a, l.activation, spec.leaky_slope);
    if (!l.reshape_to.empty()) {
      Shape s{n};
      s.insert(s.end(), l.reshape_to.begin(), l.reshape_to.end());
      a = ops::reshape(a, std::move(s));
    }
  }
  if (spec.role == NetworkRole::discriminator) a = ops::reshape(a, {n});
  return a;
}

Tensor evaluate(const Network& net, const Tensor& input, const ConditionBatch& domain,
                const ConditionBatch* label) {
  Graph g;
  const BoundNetwork b = bind(g, net, false);
  return forward(b, g.constant(input), domain, label).value();
}

NetworkSpec default_generator_spec(std::size_t noise_dim, std::size_t domain_count) {
  NetworkSpec s;
  s.role = NetworkRole::generator;
  s.noise_dim = noise_dim;
  s.sample_shape = {1, 8, 8};
  s.domain_count = domain_count;
  s.layers = {
      {LayerKind::dense, 256, 4, 2, 1, Activation::leaky_relu, false, false, false, {}},
      {LayerKind::dense, 512, 4, 2, 1, Activation::leaky_relu, true, false, false, {128, 2, 2}},
      {LayerKind::transposed_conv, 64, 4, 2, 1, Activation::leaky_relu, true, false, false, {}},
      {LayerKind::transposed_conv, 1, 4, 2, 1, Activation::tanh, true, false, false, {}},
  };
  return s;
}

NetworkSpec default_discriminator_spec(std::size_t domain_count) {
  NetworkSpec s;
  s.role = NetworkRole::discriminator;
  s.sample_shape = {1, 8, 8};
  s.domain_count = domain_count;
  s.layers = {
      {LayerKind::conv, 64, 4, 2, 1, Activation::leaky_relu, true, false, false, {}},
      {LayerKind::conv, 128, 4, 2, 1, Activation::leaky_relu, false, false, false, {}},
      {LayerKind::dense, 1, 4, 2, 1, Activation::none, false, false, false, {}},
  };
  return s;
}

NetworkSpec multi_info_generator_spec(std::size_t noise_dim, std::size_t domain_count,
                                      std::size_t label_count) {
  NetworkSpec s = default_generator_spec(noise_dim, domain_count);
  s.label_count = label_count;
  s.layers[0].inject_label = true;
  return s;
}

NetworkSpec multi_info_discriminator_spec(std::size_t domain_count, std::size_t label_count) {
  NetworkSpec s = default_discriminator_spec(domain_count);
  s.label_count = label_count;
  s.layers.back() = {LayerKind::dense, 256, 4, 2, 1, Activation::leaky_relu, false, true, false, {}};
  s.layers.push_back({LayerKind::dense, 1, 4, 2, 1, Activation::none, false, false, false, {}});
  return s;
}

// ---- text form -------------------------------------------------------------

std::string format_shape(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

Shape parse_shape(std::string_view text) {
  Shape s;
  if (text.empty()) return s;
  for (auto part : text::split(text, 'x')) s.push_back(text::parse_size(part, "shape extent"));
  return s;
}

std::string format_layer(const LayerSpec& l) {
  std::string out = std::string(kind_name(l.kind)) + ":" + std::to_string(l.width);
  if (l.kind != LayerKind::dense)
    out += ":k" + std::to_string(l.kernel) + ":s" + std::to_string(l.stride) + ":p" +
           std::to_string(l.pad);
  out += std::string(":") + activation_name(l.activation);
  if (l.inject_domain) out += ":domain";
  if (l.inject_label) out += ":label";
  if (l.batch_norm) out += ":bn";
  if (!l.reshape_to.empty()) out += ":reshape=" + format_shape(l.reshape_to);
  return out;
}

LayerSpec parse_layer(std::string_view text) {
  const auto tokens = text::split(text::trim(text), ':');
  if (tokens.size() < 2) throw ConfigError("layer '" + std::string(text) + "': need kind:width");
  LayerSpec l;
  const auto kind = tokens[0];
  if (kind == "dense")
    l.kind = LayerKind::dense;
  else if (kind == "conv")
    l.kind = LayerKind::conv;
  else if (kind == "tconv")
    l.kind = LayerKind::transposed_conv;
  else
    throw ConfigError("layer '" + std::string(text) + "': unknown kind '" + std::string(kind) + "'");
  l.width = text::parse_size(tokens[1], "layer width");
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    const std::string_view t = tokens[i];
    const bool conv_kind = l.kind != LayerKind::dense;
    if (t == "none") l.activation = Activation::none;
    else if (t == "leaky_relu") l.activation = Activation::leaky_relu;
    else if (t == "tanh") l.activation = Activation::tanh;
    else if (t == "sigmoid") l.activation = Activation::sigmoid;
    else if (t == "domain") l.inject_domain = true;
    else if (t == "label") l.inject_label = true;
    else if (t == "bn") l.batch_norm = true;
    else if (t.starts_with("reshape=")) l.reshape_to = parse_shape(t.substr(8));
    else if (conv_kind && t.size() > 1 && t[0] == 'k') l.kernel = text::parse_size(t.substr(1), "kernel");
    else if (conv_kind && t.size() > 1 && t[0] == 's') l.stride = text::parse_size(t.substr(1), "stride");
    else if (conv_kind && t.size() > 1 && t[0] == 'p') l.pad = text::parse_size(t.substr(1), "pad");
    else
      throw ConfigError("layer '" + std::string(text) + "': unknown token '" + std::string(t) + "'");
  }
  return l;
}

std::string format_layers(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out += ';';
    out += format_layer(layers[i]);
  }
  return out;
}

std::vector<LayerSpec> parse_layers(std::string_view text) {
  std::vector<LayerSpec> out;
  for (auto part : text::split(text, ';'))
    if (!text::trim(part).empty()) out.push_back(parse_layer(part));
  return out;
}

std::string serialize_spec(const NetworkSpec& spec) {
  std::ostringstream os;
  os << "role=" << role_name(spec.role) << '\n'
     << "noise_dim=" << spec.noise_dim << '\n'
     << "sample_shape=" << format_shape(spec.sample_shape) << '\n'
     << "domain_count=" << spec.domain_count << '\n'
     << "label_count=" << spec.label_count << '\n'
     << "leaky_slope=" << text::format_double(spec.leaky_slope) << '\n'
     << "layers=" << format_layers(spec.layers) << '\n';
  return os.str();
}

NetworkSpec parse_spec(std::string_view body) {
  NetworkSpec s;
  for (const auto& [key, value] : text::parse_key_values(body)) {
    if (key == "role") {
      if (value == "generator") s.role = NetworkRole::generator;
      else if (value == "discriminator") s.role = NetworkRole::discriminator;
      else throw FormatError("network spec: unknown role '" + value + "'");
    } else if (key == "noise_dim") s.noise_dim = text::parse_size(value, key);
    else if (key == "sample_shape") s.sample_shape = parse_shape(value);
    else if (key == "domain_count") s.domain_count = text::parse_size(value, key);
    else if (key == "label_count") s.label_count = text::parse_size(value, key);
    else if (key == "leaky_slope") s.leaky_slope = text::parse_double(value, key);
    else if (key == "layers") s.layers = parse_layers(value);
    else throw FormatError("network spec: unknown key '" + key + "'");
  }
  return s;
}

std::uint64_t spec_digest(const NetworkSpec& spec) {
  return text::fnv1a64(serialize_spec(spec));
}

}  // namespace aligngan
