#include "supool/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace supool {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

std::vector<Parameter> to_parameters(std::vector<std::vector<float>> values) {
    std::vector<Parameter> params;
    for (auto& v : values) {
        Parameter p;
        p.grad.assign(v.size(), 0.0f);
        p.value.assign(v.begin(), v.end());
        params.push_back(std::move(p));
    }
    return params;
}

void accumulate(AlignedVector<float>& dst, const std::vector<float>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

class ConvLayer final : public Layer {
public:
    ConvLayer(Conv2dSpec spec, const Shape4& input, std::uint64_t seed)
        : spec_(spec), params_(to_parameters(init_params(spec, input, seed))) {}

    Tensor4 forward(const Tensor4& input) override {
        input_ = input;
        return conv2d_forward<float>(input, params_[0].value, params_[1].value, spec_.out_channels, spec_.stride);
    }
    Tensor4 backward(const Tensor4& upstream) override {
        auto g = conv2d_backward<float>(input_, params_[0].value, spec_.out_channels, spec_.stride, upstream);
        accumulate(params_[0].grad, g.d_weights);
        accumulate(params_[1].grad, g.d_bias);
        return std::move(g.d_input);
    }
    std::span<Parameter> parameters() override { return params_; }
    std::span<const Parameter> parameters() const override { return params_; }

private:
    Conv2dSpec spec_;
    std::vector<Parameter> params_;
    Tensor4 input_;
};

class DenseLayer final : public Layer {
public:
    DenseLayer(DenseSpec spec, const Shape4& input, std::uint64_t seed)
        : spec_(spec), params_(to_parameters(init_params(spec, input, seed))) {}

    Tensor4 forward(const Tensor4& input) override {
        input_ = input;
        return dense_forward<float>(input, params_[0].value, params_[1].value, spec_.out_features);
    }
    Tensor4 backward(const Tensor4& upstream) override {
        auto g = dense_backward<float>(input_, params_[0].value, spec_.out_features, upstream);
        accumulate(params_[0].grad, g.d_weights);
        accumulate(params_[1].grad, g.d_bias);
        return std::move(g.d_input);
    }
    std::span<Parameter> parameters() override { return params_; }
    std::span<const Parameter> parameters() const override { return params_; }

private:
    DenseSpec spec_;
    std::vector<Parameter> params_;
    Tensor4 input_;
};

class MaxPoolLayer final : public Layer {
public:
    Tensor4 forward(const Tensor4& input) override {
        input_shape_ = input.shape();
        auto result = maxpool2_forward<float>(input);
        argmax_ = std::move(result.argmax);
        return std::move(result.output);
    }
    Tensor4 backward(const Tensor4& upstream) override {
        return maxpool2_backward<float>(input_shape_, argmax_, upstream);
    }

private:
    Shape4 input_shape_;
    std::vector<std::uint32_t> argmax_;
};

class ReluLayer final : public Layer {
public:
    Tensor4 forward(const Tensor4& input) override {
        input_ = input;
        return relu_forward<float>(input);
    }
    Tensor4 backward(const Tensor4& upstream) override { return relu_backward<float>(input_, upstream); }

private:
    Tensor4 input_;
};

class FlattenLayer final : public Layer {
public:
    Tensor4 forward(const Tensor4& input) override {
        input_shape_ = input.shape();
        return flatten<float>(input);
    }
    Tensor4 backward(const Tensor4& upstream) override { return upstream.reshaped(input_shape_); }

private:
    Shape4 input_shape_;
};

class SuPoolLayer final : public Layer {
public:
    explicit SuPoolLayer(SuPoolSpec spec) : basis_(generator_basis(spec.d)) {}

    Tensor4 forward(const Tensor4& input) override {
        auto batch = su_pool_forward<float>(input, basis_);
        caches_ = std::move(batch.caches);
        return std::move(batch.output);
    }
    Tensor4 backward(const Tensor4& upstream) override {
        return su_pool_backward<float>(caches_, upstream, basis_);
    }

private:
    GeneratorBasis basis_;
    std::vector<PoolCache> caches_;
};

} // namespace

std::string describe(const LayerSpec& spec) {
    return std::visit(overloaded{
                          [](const Conv2dSpec& s) {
                              return "Conv(" + std::to_string(s.out_channels) + ", s=" + std::to_string(s.stride) + ")";
                          },
                          [](const MaxPool2Spec&) { return std::string("Pool"); },
                          [](const ReluSpec&) { return std::string("ReLU"); },
                          [](const FlattenSpec&) { return std::string("Flatten"); },
                          [](const DenseSpec& s) { return "Dense(" + std::to_string(s.out_features) + ")"; },
                          [](const SuPoolSpec& s) { return "SUPool(d=" + std::to_string(s.d) + ")"; },
                      },
                      spec);
}

Shape4 infer_output_shape(const LayerSpec& spec, const Shape4& in) {
    return std::visit(
        overloaded{
            [&](const Conv2dSpec& s) {
                if (s.out_channels == 0) throw ShapeError("Conv2d: out_channels must be positive");
                if (s.stride != 1 && s.stride != 2) throw ShapeError("Conv2d: stride must be 1 or 2");
                if (in.h == 0 || in.w == 0 || in.c == 0) throw ShapeError("Conv2d: empty input " + to_string(in));
                return Shape4{in.n, s.out_channels, conv_output_extent(in.h, s.stride),
                              conv_output_extent(in.w, s.stride)};
            },
            [&](const MaxPool2Spec&) {
                if (in.h % 2 != 0 || in.w % 2 != 0 || in.h == 0 || in.w == 0) {
                    throw ShapeError("MaxPool2: spatial dims must be even and positive, got " + to_string(in));
                }
                return Shape4{in.n, in.c, in.h / 2, in.w / 2};
            },
            [&](const ReluSpec&) { return in; },
            [&](const FlattenSpec&) { return Shape4{in.n, in.per_sample(), 1, 1}; },
            [&](const DenseSpec& s) {
                if (s.out_features == 0) throw ShapeError("Dense: out_features must be positive");
                if (in.h != 1 || in.w != 1) throw ShapeError("Dense: input must be flattened, got " + to_string(in));
                return Shape4{in.n, s.out_features, 1, 1};
            },
            [&](const SuPoolSpec& s) {
                if (s.d < 2 || s.d > 16) throw ShapeError("SUPool: d must lie in [2, 16]");
                const auto expected = static_cast<std::size_t>(s.d * s.d - 1);
                if (in.h != 1 || in.w != 1 || in.c != expected) {
                    throw ShapeError("SUPool(d=" + std::to_string(s.d) + "): expected " + std::to_string(expected) +
                                     " features, got " + to_string(in));
                }
                return Shape4{in.n, static_cast<std::size_t>(2 * s.d), 1, 1};
            },
        },
        spec);
}

std::vector<std::size_t> parameter_sizes(const LayerSpec& spec, const Shape4& in) {
    if (const auto* conv = std::get_if<Conv2dSpec>(&spec)) {
        return {conv->out_channels * in.c * kConvKernel * kConvKernel, conv->out_channels};
    }
    if (const auto* dense = std::get_if<DenseSpec>(&spec)) {
        return {in.per_sample() * dense->out_features, dense->out_features};
    }
    return {};
}

double init_bound(const LayerSpec& spec, const Shape4& in) {
    std::size_t fan_in = 0;
    if (std::holds_alternative<Conv2dSpec>(spec)) fan_in = in.c * kConvKernel * kConvKernel;
    if (std::holds_alternative<DenseSpec>(spec)) fan_in = in.per_sample();
    if (fan_in == 0) return 0.0;
    return std::sqrt(6.0 / static_cast<double>(fan_in));
}

std::vector<std::vector<float>> init_params(const LayerSpec& spec, const Shape4& in, std::uint64_t seed) {
    const std::vector<std::size_t> sizes = parameter_sizes(spec, in);
    if (sizes.empty()) return {};
    const double bound = init_bound(spec, in);
    auto rng = make_rng(seed, 0);
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<float> weights(sizes[0]);
    for (auto& w : weights) w = static_cast<float>(dist(rng));
    return {std::move(weights), std::vector<float>(sizes[1], 0.0f)};
}

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape4& in, std::uint64_t seed) {
    infer_output_shape(spec, in);
    return std::visit(overloaded{
                          [&](const Conv2dSpec& s) -> std::unique_ptr<Layer> {
                              return std::make_unique<ConvLayer>(s, in, seed);
                          },
                          [&](const MaxPool2Spec&) -> std::unique_ptr<Layer> { return std::make_unique<MaxPoolLayer>(); },
                          [&](const ReluSpec&) -> std::unique_ptr<Layer> { return std::make_unique<ReluLayer>(); },
                          [&](const FlattenSpec&) -> std::unique_ptr<Layer> { return std::make_unique<FlattenLayer>(); },
                          [&](const DenseSpec& s) -> std::unique_ptr<Layer> {
                              return std::make_unique<DenseLayer>(s, in, seed);
                          },
                          [&](const SuPoolSpec& s) -> std::unique_ptr<Layer> {
                              return std::make_unique<SuPoolLayer>(s);
                          },
                      },
                      spec);
}

// ---------------------------------------------------------------------------

Network::Network(std::vector<LayerSpec> specs, Shape3 input, std::uint64_t seed)
    : specs_(std::move(specs)), input_(input) {
    if (specs_.empty()) throw ShapeError("Network: no layers");
    if (input.size() == 0) throw ShapeError("Network: empty input shape");
    Shape4 shape{1, input.c, input.h, input.w};
    auto rng = make_rng(seed, 0x5eed);
    for (const auto& spec : specs_) {
        layers_.push_back(make_layer(spec, shape, rng()));
        shape = infer_output_shape(spec, shape);
        shapes_.push_back(shape);
    }
}

Tensor4 Network::forward(const Tensor4& input) {
    const Shape4& s = input.shape();
    if (s.c != input_.c || s.h != input_.h || s.w != input_.w) {
        throw ShapeError("Network: input " + to_string(s) + " does not match configured " + std::to_string(input_.c) +
                         "x" + std::to_string(input_.h) + "x" + std::to_string(input_.w));
    }
    Tensor4 x = layers_.front()->forward(input);
    for (std::size_t i = 1; i < layers_.size(); ++i) x = layers_[i]->forward(x);
    return x;
}

void Network::backward(const Tensor4& d_output) {
    Tensor4 g = layers_.back()->backward(d_output);
    for (std::size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i]->backward(g);
}

void Network::zero_grad() {
    for (Parameter* p : parameters()) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

std::vector<Parameter*> Network::parameters() {
    std::vector<Parameter*> out;
    for (auto& layer : layers_) {
        for (auto& p : layer->parameters()) out.push_back(&p);
    }
    return out;
}

std::vector<const Parameter*> Network::parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& layer : layers_) {
        for (const auto& p : std::as_const(*layer).parameters()) out.push_back(&p);
    }
    return out;
}

std::size_t parameter_count(const Network& net) {
    std::size_t total = 0;
    for (const Parameter* p : net.parameters()) total += p->value.size();
    return total;
}

// ---------------------------------------------------------------------------

void adam_step(std::span<float> params, std::span<const float> grads, AdamMoments& state, std::int64_t step,
               const AdamConfig& cfg) {
    if (grads.size() != params.size()) throw ShapeError("adam_step: parameter/gradient size mismatch");
    if (step < 1) throw std::invalid_argument("adam_step: step must be >= 1");
    if (state.m.size() != params.size()) state.m.assign(params.size(), 0.0f);
    if (state.v.size() != params.size()) state.v.assign(params.size(), 0.0f);

    const double correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        const double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        const double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        state.m[i] = static_cast<float>(m);
        state.v[i] = static_cast<float>(v);
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        params[i] = static_cast<float>(params[i] - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
}

Adam::Adam(Network& net, AdamConfig cfg) : net_(&net), cfg_(cfg) {
    for (const Parameter* p : net.parameters()) {
        moments_.push_back({std::vector<float>(p->value.size(), 0.0f), std::vector<float>(p->value.size(), 0.0f)});
    }
}

void Adam::step() {
    ++step_;
    auto params = net_->parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        adam_step(params[i]->value, params[i]->grad, moments_[i], step_, cfg_);
    }
}

} // namespace supool
