#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "inmerge/layers.hpp"
#include "inmerge/tensor.hpp"

namespace inmerge {

enum class HeadKind { kMulticlass, kMultilabel };

struct Head {
  HeadKind kind = HeadKind::kMulticlass;
  std::size_t classes = 2;

  bool operator==(const Head&) const = default;
};

// Zero in_channels / in_features means "infer from the previous layer".
struct Conv2dSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;

  bool operator==(const Conv2dSpec&) const = default;
};

struct ReluSpec {
  bool operator==(const ReluSpec&) const = default;
};

struct MaxPool2dSpec {
  std::size_t window = 2;
  std::size_t stride = 2;

  bool operator==(const MaxPool2dSpec&) const = default;
};

struct DenseSpec {
  std::size_t in_features = 0;
  std::size_t out_features = 1;

  bool operator==(const DenseSpec&) const = default;
};

struct FlattenSpec {
  bool operator==(const FlattenSpec&) const = default;
};

using LayerSpec =
    std::variant<Conv2dSpec, ReluSpec, MaxPool2dSpec, DenseSpec, FlattenSpec>;

std::string_view layer_kind_name(const LayerSpec& spec);

// Architecture: either a named preset or an explicit layer list, plus the
// input geometry and the output head.
struct ArchConfig {
  std::string preset;
  std::vector<LayerSpec> layers;
  std::size_t channels = 1;
  std::size_t height = 28;
  std::size_t width = 28;
  Head head;

  bool operator==(const ArchConfig&) const = default;
};

inline constexpr std::string_view kPresetTinyCnn = "tiny_cnn";
inline constexpr std::string_view kPresetSmallVggD = "small_vgg_d";

// Expands the preset (if any), infers input extents and validates every
// layer against the input geometry. The network must end in a [N, K] output.
std::vector<LayerSpec> resolve_layers(const ArchConfig& config);

struct Parameter {
  std::string name;
  Tensor value;
};

// Per-layer values kept by a training forward pass for backward.
struct ForwardTrace {
  std::vector<Tensor> inputs;
  std::vector<std::vector<std::size_t>> pool_argmax;
};

class Model;

struct ConvLayerRef {
  std::size_t ordinal;
  std::size_t layer;
  Tensor& weight;
};

struct ConstConvLayerRef {
  std::size_t ordinal;
  std::size_t layer;
  const Tensor& weight;
};

class Model {
 public:
  Model(ArchConfig arch, std::vector<LayerSpec> layers,
        std::vector<Parameter> params);

  const ArchConfig& arch() const { return arch_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const Head& head() const { return arch_.head; }
  Shape input_shape(std::size_t batch) const {
    return {batch, arch_.channels, arch_.height, arch_.width};
  }

  std::size_t num_conv() const { return num_conv_; }
  // Conv ordinal of the layer at `layer`, if it is a conv layer.
  std::optional<std::size_t> conv_ordinal(std::size_t layer) const {
    return conv_index_.at(layer);
  }
  // Forward order; the ordinal is what the shallow-layer count compares to.
  std::vector<ConvLayerRef> conv_layers();
  std::vector<ConstConvLayerRef> conv_layers() const;

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  std::vector<std::string> param_names() const;
  bool has_param(std::string_view name) const;
  const Tensor& get_param(std::string_view name) const;
  void set_param(std::string_view name, Tensor value);
  std::size_t parameter_count() const;

  Tensor forward(const Tensor& input) const;
  Tensor forward(const Tensor& input, ForwardTrace& trace) const;
  // Gradients aligned with params().
  std::vector<Tensor> backward(const Tensor& grad_logits,
                               const ForwardTrace& trace) const;

 private:
  struct ParamSlots {
    int weight = -1;
    int bias = -1;
  };

  std::size_t param_slot(std::string_view name) const;
  Tensor run_forward(const Tensor& input, ForwardTrace* trace) const;

  ArchConfig arch_;
  std::vector<LayerSpec> layers_;
  std::vector<Parameter> params_;
  std::vector<ParamSlots> slots_;
  std::vector<std::optional<std::size_t>> conv_index_;
  std::size_t num_conv_ = 0;
};

// He-uniform (fan-in) weights and zero biases drawn from `seed`.
Model build_model(const ArchConfig& config, std::uint64_t seed);

bool bit_equal(const Model& a, const Model& b);

}  // namespace inmerge
