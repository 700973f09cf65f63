#pragma once

#include "supool/ops.hpp"
#include "supool/su_pool.hpp"
#include "supool/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace supool {

// Layer specifications. Convolutions are always 3x3 with padding 1 and carry a bias.
struct Conv2dSpec {
    std::size_t out_channels = 0;
    std::size_t stride = 1;
};
struct MaxPool2Spec {};
struct ReluSpec {};
struct FlattenSpec {};
struct DenseSpec {
    std::size_t out_features = 0;
};
struct SuPoolSpec {
    int d = 3;
};

using LayerSpec = std::variant<Conv2dSpec, MaxPool2Spec, ReluSpec, FlattenSpec, DenseSpec, SuPoolSpec>;

std::string describe(const LayerSpec& spec);

/// Output shape of a layer, or ShapeError if the input does not fit.
Shape4 infer_output_shape(const LayerSpec& spec, const Shape4& input);

/// Weight and bias lengths for a layer given its input shape (empty for parameter-free layers).
std::vector<std::size_t> parameter_sizes(const LayerSpec& spec, const Shape4& input);

/// He-uniform weights in (-b, b), b = sqrt(6 / fan_in); zero biases.
/// Returns {weights, bias} for Conv2d/Dense and nothing otherwise.
std::vector<std::vector<float>> init_params(const LayerSpec& spec, const Shape4& input, std::uint64_t seed);

/// He-uniform bound for a layer's weights.
double init_bound(const LayerSpec& spec, const Shape4& input);

struct Parameter {
    AlignedVector<float> value;
    AlignedVector<float> grad;
};

class Layer {
public:
    virtual ~Layer() = default;

    /// Caches whatever backward needs.
    virtual Tensor4 forward(const Tensor4& input) = 0;
    /// Accumulates parameter gradients and returns dL/dinput.
    virtual Tensor4 backward(const Tensor4& upstream) = 0;

    virtual std::span<Parameter> parameters() { return {}; }
    virtual std::span<const Parameter> parameters() const { return {}; }
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape4& input, std::uint64_t seed);

/// Sequential network built from layer specs for a fixed per-sample input shape.
class Network {
public:
    Network(std::vector<LayerSpec> specs, Shape3 input, std::uint64_t seed);

    Network(Network&&) noexcept = default;
    Network& operator=(Network&&) noexcept = default;

    Tensor4 forward(const Tensor4& input);
    /// Back-propagates dL/doutput; gradients accumulate until zero_grad().
    void backward(const Tensor4& d_output);
    void zero_grad();

    const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
    Shape3 input_shape() const noexcept { return input_; }
    /// Per-sample output shape of every layer (batch dimension 1).
    const std::vector<Shape4>& layer_shapes() const noexcept { return shapes_; }
    Shape4 output_shape() const { return shapes_.back(); }

    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;

private:
    std::vector<LayerSpec> specs_;
    Shape3 input_;
    std::vector<Shape4> shapes_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Total number of trainable scalars.
std::size_t parameter_count(const Network& net);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamMoments {
    std::vector<float> m;
    std::vector<float> v;
};

/// One bias-corrected Adam update; `step` is the 1-based update count.
void adam_step(std::span<float> params, std::span<const float> grads, AdamMoments& state, std::int64_t step,
               const AdamConfig& cfg);

/// Adam state for every parameter of one network.
class Adam {
public:
    Adam(Network& net, AdamConfig cfg);

    void step();
    std::int64_t steps_taken() const noexcept { return step_; }

private:
    Network* net_;
    AdamConfig cfg_;
    std::vector<AdamMoments> moments_;
    std::int64_t step_ = 0;
};

} // namespace supool
