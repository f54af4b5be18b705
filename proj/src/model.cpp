#include "inmerge/model.hpp"

#include <cmath>

#include "inmerge/error.hpp"
#include "inmerge/rng.hpp"

namespace inmerge {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<LayerSpec> preset_layers(const ArchConfig& c) {
  auto conv = [](std::size_t out) {
    return Conv2dSpec{0, out, 3, 3, 1, 1};
  };
  std::vector<LayerSpec> layers;
  auto stage = [&](std::size_t width) {
    layers.push_back(conv(width));
    layers.push_back(ReluSpec{});
    layers.push_back(conv(width));
    layers.push_back(ReluSpec{});
    layers.push_back(MaxPool2dSpec{2, 2});
  };
  if (c.preset == kPresetTinyCnn) {
    stage(8);
    stage(16);
    layers.push_back(conv(32));
    layers.push_back(ReluSpec{});
    layers.push_back(conv(32));
    layers.push_back(ReluSpec{});
    layers.push_back(FlattenSpec{});
    layers.push_back(DenseSpec{0, c.head.classes});
  } else if (c.preset == kPresetSmallVggD) {
    stage(16);
    stage(32);
    stage(64);
    stage(64);
    layers.push_back(FlattenSpec{});
    layers.push_back(DenseSpec{0, 128});
    layers.push_back(ReluSpec{});
    layers.push_back(DenseSpec{0, c.head.classes});
  } else {
    throw ConfigError("unknown architecture preset '" + c.preset + "'");
  }
  return layers;
}

}  // namespace

std::string_view layer_kind_name(const LayerSpec& spec) {
  return std::visit(
      Overloaded{[](const Conv2dSpec&) { return std::string_view("conv2d"); },
                 [](const ReluSpec&) { return std::string_view("relu"); },
                 [](const MaxPool2dSpec&) {
                   return std::string_view("maxpool2d");
                 },
                 [](const DenseSpec&) { return std::string_view("dense"); },
                 [](const FlattenSpec&) {
                   return std::string_view("flatten");
                 }},
      spec);
}

std::vector<LayerSpec> resolve_layers(const ArchConfig& config) {
  if (config.head.classes == 0) throw ConfigError("class count must be >= 1");
  if (config.channels == 0 || config.height == 0 || config.width == 0) {
    throw ConfigError("input extents must be positive");
  }
  std::vector<LayerSpec> layers;
  if (!config.preset.empty()) {
    if (!config.layers.empty()) {
      throw ConfigError("architecture gives both a preset and a layer list");
    }
    layers = preset_layers(config);
  } else {
    layers = config.layers;
  }
  if (layers.empty()) throw ConfigError("architecture has no layers");

  // Running shape without the batch axis: rank 3 (C,H,W) or rank 1 (F).
  Shape shape{config.channels, config.height, config.width};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string where = "layer " + std::to_string(i) + " (" +
                              std::string(layer_kind_name(layers[i])) + ")";
    try {
      std::visit(
          Overloaded{
              [&](Conv2dSpec& s) {
                if (shape.size() != 3) {
                  throw ConfigError(where + " needs a spatial input");
                }
                if (s.in_channels == 0) s.in_channels = shape[0];
                if (s.in_channels != shape[0]) {
                  throw ConfigError(where + " expects " +
                                    std::to_string(s.in_channels) +
                                    " input channels, gets " +
                                    std::to_string(shape[0]));
                }
                if (s.out_channels == 0 || s.kernel_h == 0 || s.kernel_w == 0 ||
                    s.stride == 0) {
                  throw ConfigError(where +
                                    " needs positive channels/kernel/stride");
                }
                shape = {s.out_channels,
                         window_output_extent(shape[1], s.kernel_h, s.stride,
                                              s.padding),
                         window_output_extent(shape[2], s.kernel_w, s.stride,
                                              s.padding)};
              },
              [&](ReluSpec&) {},
              [&](MaxPool2dSpec& s) {
                if (shape.size() != 3) {
                  throw ConfigError(where + " needs a spatial input");
                }
                shape = {shape[0],
                         window_output_extent(shape[1], s.window, s.stride, 0),
                         window_output_extent(shape[2], s.window, s.stride, 0)};
              },
              [&](DenseSpec& s) {
                if (shape.size() != 1) {
                  throw ConfigError(where + " needs a flattened input");
                }
                if (s.in_features == 0) s.in_features = shape[0];
                if (s.in_features != shape[0] || s.out_features == 0) {
                  throw ConfigError(where + " feature mismatch: expects " +
                                    std::to_string(s.in_features) + ", gets " +
                                    std::to_string(shape[0]));
                }
                shape = {s.out_features};
              },
              [&](FlattenSpec&) { shape = {shape_size(shape)}; }},
          layers[i]);
    } catch (const ShapeError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (shape.size() != 1 || shape[0] != config.head.classes) {
    throw ConfigError("network output " + shape_to_string(shape) +
                      " does not match " +
                      std::to_string(config.head.classes) + " classes");
  }
  return layers;
}

Model::Model(ArchConfig arch, std::vector<LayerSpec> layers,
             std::vector<Parameter> params)
    : arch_(std::move(arch)),
      layers_(std::move(layers)),
      params_(std::move(params)),
      slots_(layers_.size()),
      conv_index_(layers_.size()) {
  std::size_t next = 0;
  std::size_t n_dense = 0;
  auto expect = [&](const std::string& name, const Shape& shape) -> int {
    if (next >= params_.size() || params_[next].name != name) {
      throw ShapeError("model parameter '" + name + "' missing or out of order");
    }
    require_shape(params_[next].value, shape, name);
    return static_cast<int>(next++);
  };
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (const auto* c = std::get_if<Conv2dSpec>(&layers_[i])) {
      const std::string prefix = "conv" + std::to_string(num_conv_);
      slots_[i].weight = expect(prefix + ".weight", {c->out_channels,
                                                     c->in_channels,
                                                     c->kernel_h, c->kernel_w});
      slots_[i].bias = expect(prefix + ".bias", {c->out_channels});
      conv_index_[i] = num_conv_++;
    } else if (const auto* d = std::get_if<DenseSpec>(&layers_[i])) {
      const std::string prefix = "dense" + std::to_string(n_dense++);
      slots_[i].weight =
          expect(prefix + ".weight", {d->out_features, d->in_features});
      slots_[i].bias = expect(prefix + ".bias", {d->out_features});
    }
  }
  if (next != params_.size()) {
    throw ShapeError("model has unexpected extra parameters");
  }
}

std::vector<ConvLayerRef> Model::conv_layers() {
  std::vector<ConvLayerRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (conv_index_[i]) {
      out.push_back({*conv_index_[i], i, params_[slots_[i].weight].value});
    }
  }
  return out;
}

std::vector<ConstConvLayerRef> Model::conv_layers() const {
  std::vector<ConstConvLayerRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (conv_index_[i]) {
      out.push_back({*conv_index_[i], i, params_[slots_[i].weight].value});
    }
  }
  return out;
}

std::vector<std::string> Model::param_names() const {
  std::vector<std::string> names;
  names.reserve(params_.size());
  for (const auto& p : params_) names.push_back(p.name);
  return names;
}

std::size_t Model::param_slot(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw ShapeError("unknown parameter '" + std::string(name) + "'");
}

bool Model::has_param(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

const Tensor& Model::get_param(std::string_view name) const {
  return params_[param_slot(name)].value;
}

void Model::set_param(std::string_view name, Tensor value) {
  auto& slot = params_[param_slot(name)].value;
  require_shape(value, slot.shape(), std::string(name));
  slot = std::move(value);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Tensor Model::forward(const Tensor& input) const {
  return run_forward(input, nullptr);
}

Tensor Model::forward(const Tensor& input, ForwardTrace& trace) const {
  return run_forward(input, &trace);
}

Tensor Model::run_forward(const Tensor& input, ForwardTrace* trace) const {
  if (input.rank() != 4 || input.shape() != input_shape(input.dim(0))) {
    throw ShapeError("model input: expected [N," +
                     std::to_string(arch_.channels) + "," +
                     std::to_string(arch_.height) + "," +
                     std::to_string(arch_.width) + "], got " +
                     shape_to_string(input.shape()));
  }
  if (trace) {
    trace->inputs.assign(layers_.size(), Tensor());
    trace->pool_argmax.assign(layers_.size(), {});
  }
  Tensor x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const ParamSlots& s = slots_[i];
    Tensor y = std::visit(
        Overloaded{
            [&](const Conv2dSpec& c) {
              return conv2d_forward(x, params_[s.weight].value,
                                    params_[s.bias].value,
                                    {c.stride, c.padding});
            },
            [&](const ReluSpec&) { return relu_forward(x); },
            [&](const MaxPool2dSpec& p) {
              PoolResult r = maxpool2d_forward(x, p.window, p.stride);
              if (trace) trace->pool_argmax[i] = std::move(r.argmax);
              return std::move(r.output);
            },
            [&](const DenseSpec&) {
              return dense_forward(x, params_[s.weight].value,
                                   params_[s.bias].value);
            },
            [&](const FlattenSpec&) { return flatten_forward(x); }},
        layers_[i]);
    if (trace) {
      trace->inputs[i] = std::move(x);
    }
    x = std::move(y);
  }
  return x;
}

std::vector<Tensor> Model::backward(const Tensor& grad_logits,
                                    const ForwardTrace& trace) const {
  if (trace.inputs.size() != layers_.size()) {
    throw ShapeError("backward: trace does not belong to this model");
  }
  std::vector<Tensor> grads(params_.size());
  Tensor g = grad_logits;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Tensor& in = trace.inputs[i];
    const ParamSlots& s = slots_[i];
    const bool need_input = i > 0;
    std::visit(
        Overloaded{
            [&](const Conv2dSpec& c) {
              ConvGrads r = conv2d_backward(g, in, params_[s.weight].value,
                                            {c.stride, c.padding}, need_input);
              grads[s.weight] = std::move(r.weight);
              grads[s.bias] = std::move(r.bias);
              g = std::move(r.input);
            },
            [&](const ReluSpec&) { g = relu_backward(g, in); },
            [&](const MaxPool2dSpec&) {
              g = maxpool2d_backward(g, trace.pool_argmax[i], in.shape());
            },
            [&](const DenseSpec&) {
              DenseGrads r =
                  dense_backward(g, in, params_[s.weight].value, need_input);
              grads[s.weight] = std::move(r.weight);
              grads[s.bias] = std::move(r.bias);
              g = std::move(r.input);
            },
            [&](const FlattenSpec&) {
              if (need_input) g = g.reshaped(in.shape());
            }},
        layers_[i]);
  }
  return grads;
}

Model build_model(const ArchConfig& config, std::uint64_t seed) {
  std::vector<LayerSpec> layers = resolve_layers(config);
  Rng rng(derive_seed(seed, StreamPurpose::kInit));
  std::vector<Parameter> params;
  std::size_t n_conv = 0, n_dense = 0;
  auto he_uniform = [&](Shape shape, std::size_t fan_in) {
    Tensor t(std::move(shape));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-bound, bound));
    return t;
  };
  for (const auto& layer : layers) {
    if (const auto* c = std::get_if<Conv2dSpec>(&layer)) {
      const std::string prefix = "conv" + std::to_string(n_conv++);
      params.push_back(
          {prefix + ".weight",
           he_uniform({c->out_channels, c->in_channels, c->kernel_h,
                       c->kernel_w},
                      c->in_channels * c->kernel_h * c->kernel_w)});
      params.push_back({prefix + ".bias", Tensor({c->out_channels})});
    } else if (const auto* d = std::get_if<DenseSpec>(&layer)) {
      const std::string prefix = "dense" + std::to_string(n_dense++);
      params.push_back({prefix + ".weight",
                        he_uniform({d->out_features, d->in_features},
                                   d->in_features)});
      params.push_back({prefix + ".bias", Tensor({d->out_features})});
    }
  }
  return Model(config, std::move(layers), std::move(params));
}

bool bit_equal(const Model& a, const Model& b) {
  if (a.params().size() != b.params().size()) return false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    if (a.params()[i].name != b.params()[i].name ||
        !bit_equal(a.params()[i].value, b.params()[i].value)) {
      return false;
    }
  }
  return true;
}

}  // namespace inmerge
