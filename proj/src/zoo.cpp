#include "supool/zoo.hpp"

#include <stdexcept>

namespace supool {

namespace {

void append(std::vector<LayerSpec>& dst, std::initializer_list<LayerSpec> layers) {
    dst.insert(dst.end(), layers.begin(), layers.end());
}

// Conv(32, s2) - Conv(64, s2) - Conv(64, s2) - Flatten
void strided_backbone(std::vector<LayerSpec>& layers) {
    append(layers, {Conv2dSpec{32, 2}, ReluSpec{}, Conv2dSpec{64, 2}, ReluSpec{}, Conv2dSpec{64, 2}, ReluSpec{},
                    FlattenSpec{}});
}

// Conv(40) - Pool - Conv(64) - Pool - Conv(80) [- Pool] - Flatten
void pooled_backbone(std::vector<LayerSpec>& layers, bool final_pool) {
    append(layers, {Conv2dSpec{40, 1}, ReluSpec{}, MaxPool2Spec{}, Conv2dSpec{64, 1}, ReluSpec{}, MaxPool2Spec{},
                    Conv2dSpec{80, 1}, ReluSpec{}});
    if (final_pool) layers.push_back(MaxPool2Spec{});
    layers.push_back(FlattenSpec{});
}

// (d^2 - 1) -> 2d -> 64 -> classes, all dense.
void classical_bottleneck(std::vector<LayerSpec>& layers, int d, std::size_t classes) {
    const auto algebra = static_cast<std::size_t>(d * d - 1);
    const auto state = static_cast<std::size_t>(2 * d);
    append(layers, {DenseSpec{algebra}, ReluSpec{}, DenseSpec{state}, ReluSpec{}, DenseSpec{64}, ReluSpec{},
                    DenseSpec{classes}});
}

// (d^2 - 1) -> SU(d) pooling -> 2d -> 64 -> classes. No activation before the pooling layer.
void unitary_head(std::vector<LayerSpec>& layers, int d, std::size_t classes) {
    const auto algebra = static_cast<std::size_t>(d * d - 1);
    append(layers, {DenseSpec{algebra}, SuPoolSpec{d}, DenseSpec{64}, ReluSpec{}, DenseSpec{classes}});
}

std::size_t required_divisor(ModelId id) { return id == ModelId::M5 ? 4 : 8; }

} // namespace

std::string to_string(ModelId id) {
    switch (id) {
    case ModelId::M1: return "M1";
    case ModelId::M2: return "M2";
    case ModelId::M3: return "M3";
    case ModelId::M4: return "M4";
    case ModelId::M5: return "M5";
    }
    throw std::invalid_argument("unknown model id");
}

ModelId parse_model_id(std::string_view text) {
    for (ModelId id : kAllModels) {
        const std::string name = to_string(id);
        if (text == name || (text.size() == 1 && text[0] == name[1])) return id;
    }
    throw std::invalid_argument("unknown model id '" + std::string(text) + "' (expected M1..M5)");
}

std::string model_title(ModelId id) {
    switch (id) {
    case ModelId::M1: return "Model 1 (Shallow Classical)";
    case ModelId::M2: return "Model 2 (Deep Classical w/ bottleneck)";
    case ModelId::M3: return "Model 3 (Deep Classical w/o bottleneck)";
    case ModelId::M4: return "Model 4 (Shallow Quantum Inspired)";
    case ModelId::M5: return "Model 5 (Deep Quantum Inspired)";
    }
    throw std::invalid_argument("unknown model id");
}

std::vector<LayerSpec> model_layers(const ModelSpec& spec) {
    if (spec.d < 2 || spec.d > 16) throw std::invalid_argument("model d must lie in [2, 16]");
    if (spec.num_classes < 2) throw std::invalid_argument("model needs at least two classes");
    const std::size_t div = required_divisor(spec.id);
    if (spec.input.c == 0 || spec.input.h == 0 || spec.input.w == 0 || spec.input.h % div != 0 ||
        spec.input.w % div != 0) {
        throw ShapeError(to_string(spec.id) + ": input " + std::to_string(spec.input.c) + "x" +
                         std::to_string(spec.input.h) + "x" + std::to_string(spec.input.w) +
                         " incompatible with the downsampling chain (spatial dims must be positive multiples of " +
                         std::to_string(div) + ")");
    }

    std::vector<LayerSpec> layers;
    switch (spec.id) {
    case ModelId::M1:
        strided_backbone(layers);
        classical_bottleneck(layers, spec.d, spec.num_classes);
        break;
    case ModelId::M2:
        pooled_backbone(layers, true);
        classical_bottleneck(layers, spec.d, spec.num_classes);
        break;
    case ModelId::M3:
        pooled_backbone(layers, true);
        append(layers, {DenseSpec{256}, ReluSpec{}, DenseSpec{128}, ReluSpec{}, DenseSpec{64}, ReluSpec{},
                        DenseSpec{spec.num_classes}});
        break;
    case ModelId::M4:
        strided_backbone(layers);
        unitary_head(layers, spec.d, spec.num_classes);
        break;
    case ModelId::M5:
        pooled_backbone(layers, false);
        unitary_head(layers, spec.d, spec.num_classes);
        break;
    }
    return layers;
}

Network build_model(const ModelSpec& spec, std::uint64_t seed) { return Network(model_layers(spec), spec.input, seed); }

std::size_t count_params(const Network& net) { return parameter_count(net); }

std::size_t count_params(const ModelSpec& spec) {
    Shape4 shape{1, spec.input.c, spec.input.h, spec.input.w};
    std::size_t total = 0;
    for (const auto& layer : model_layers(spec)) {
        for (std::size_t n : parameter_sizes(layer, shape)) total += n;
        shape = infer_output_shape(layer, shape);
    }
    return total;
}

std::size_t flatten_width(const ModelSpec& spec) {
    Shape4 shape{1, spec.input.c, spec.input.h, spec.input.w};
    for (const auto& layer : model_layers(spec)) {
        shape = infer_output_shape(layer, shape);
        if (std::holds_alternative<FlattenSpec>(layer)) return shape.c;
    }
    throw std::logic_error("model without a flatten layer");
}

std::size_t published_param_count(ModelId id) {
    switch (id) {
    case ModelId::M1: return 134'088;
    case ModelId::M2: return 198'492;
    case ModelId::M3: return 1'426'762;
    case ModelId::M4: return 93'074;
    case ModelId::M5: return 238'930;
    }
    throw std::invalid_argument("unknown model id");
}

} // namespace supool
