#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "aligngan/autodiff.hpp"
#include "aligngan/conditioning.hpp"

namespace aligngan {

enum class LayerKind { dense, conv, transposed_conv };
enum class Activation { none, leaky_relu, tanh, sigmoid };
enum class NetworkRole { generator, discriminator };

/// One layer. Condition codes are appended to the layer's *input*:
/// inject_domain / inject_label say which codes this layer consumes.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t width = 1;  // units (dense) or output channels (conv kinds)
  std::size_t kernel = 4;
  std::size_t stride = 2;
  std::size_t pad = 1;
  Activation activation = Activation::leaky_relu;
  bool inject_domain = false;
  bool inject_label = false;
  bool batch_norm = false;
  Shape reshape_to;  // dense only: per-sample {C,H,W} view of the output

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  NetworkRole role = NetworkRole::generator;
  std::vector<LayerSpec> layers;
  std::size_t noise_dim = 0;  // generator input width
  Shape sample_shape;         // generator output / discriminator input, per sample
  std::size_t domain_count = 2;
  std::size_t label_count = 0;
  double leaky_slope = 0.2;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Shapes resolved while validating a spec (per sample, batch axis omitted).
struct LayerPlan {
  Shape input;           // activation arriving at the layer, before injection
  std::size_t fan_in;    // features (dense) or channels (conv kinds) after injection
  Shape output;          // after activation and any reshape
};

/// Checks the spec and resolves every layer's shapes. Throws SpecError when
///  - a generator's noise-input layer consumes the domain code (rule 1),
///  - a discriminator's image-input layer does not consume it (rule 2),
///  - any layer consumes both codes (domain and label sites are disjoint),
///  - shapes do not chain, or the head does not match the role.
std::vector<LayerPlan> plan_network(const NetworkSpec& spec);

struct Parameter {
  std::string name;
  Tensor value;
};

class Network {
 public:
  Network(NetworkSpec spec, std::vector<Parameter> params);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<LayerPlan>& plan() const { return plan_; }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::size_t parameter_count() const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  NetworkSpec spec_;
  std::vector<LayerPlan> plan_;
  std::vector<Parameter> params_;
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from `seed`, biases
/// zero, batch-norm scale one. fan_in counts the injected code entries.
Network build_generator(const NetworkSpec& spec, std::uint64_t seed);
Network build_discriminator(const NetworkSpec& spec, std::uint64_t seed);

/// Parameters of a network inserted into a graph.
struct BoundNetwork {
  const Network* net = nullptr;
  std::vector<Var> params;
};

BoundNetwork bind(Graph& graph, const Network& net, bool trainable);

/// Generator: input [N,noise_dim] -> samples [N,...] in [-1,1].
/// Discriminator: input [N,...] -> raw scores [N] (no output squashing).
/// `label` may be null only when the network has no label sites.
Var forward(const BoundNetwork& bound, Var input, const ConditionBatch& domain,
            const ConditionBatch* label);

/// Forward pass on a scratch graph with no gradients.
Tensor evaluate(const Network& net, const Tensor& input, const ConditionBatch& domain,
                const ConditionBatch* label);

// Default desk-scale stacks for 1x8x8 samples.
NetworkSpec default_generator_spec(std::size_t noise_dim = 64, std::size_t domain_count = 2);
NetworkSpec default_discriminator_spec(std::size_t domain_count = 2);
/// Domain + label variants: generator takes the label at its noise layer,
/// discriminator at its penultimate dense layer.
NetworkSpec multi_info_generator_spec(std::size_t noise_dim, std::size_t domain_count,
                                      std::size_t label_count);
NetworkSpec multi_info_discriminator_spec(std::size_t domain_count, std::size_t label_count);

// Text form of specs, used in checkpoints and configs.
std::string format_layer(const LayerSpec& layer);
LayerSpec parse_layer(std::string_view text);
std::string format_layers(const std::vector<LayerSpec>& layers);  // ';'-separated
std::vector<LayerSpec> parse_layers(std::string_view text);
std::string format_shape(const Shape& shape);  // "1x8x8"
Shape parse_shape(std::string_view text);
std::string serialize_spec(const NetworkSpec& spec);
NetworkSpec parse_spec(std::string_view text);
/// FNV-1a over serialize_spec.
std::uint64_t spec_digest(const NetworkSpec& spec);

const char* role_name(NetworkRole role);

}  // namespace aligngan
