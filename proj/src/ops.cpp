#include "supool/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace supool {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMatrix = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMapMatrix = Eigen::Map<const RowMatrix<T>>;

struct ConvGeometry {
    std::size_t in_c, in_h, in_w;
    std::size_t out_c, out_h, out_w;
    std::size_t stride;

    std::size_t patch() const { return in_c * kConvKernel * kConvKernel; }
    std::size_t positions() const { return out_h * out_w; }
};

ConvGeometry conv_geometry(const Shape4& in, std::size_t weights_size, std::size_t out_channels,
                           std::size_t stride) {
    if (stride != 1 && stride != 2) throw ShapeError("conv2d: stride must be 1 or 2");
    if (in.h == 0 || in.w == 0) throw ShapeError("conv2d: empty spatial extent");
    if (weights_size != out_channels * in.c * kConvKernel * kConvKernel) {
        throw ShapeError("conv2d: weights of length " + std::to_string(weights_size) + " do not match " +
                         std::to_string(out_channels) + "x" + std::to_string(in.c) + "x3x3");
    }
    return {in.c, in.h, in.w, out_channels, conv_output_extent(in.h, stride), conv_output_extent(in.w, stride), stride};
}

// cols is (patch x positions), row-major.
template <typename T>
void im2col(std::span<const T> image, const ConvGeometry& g, AlignedVector<T>& cols) {
    const std::size_t positions = g.positions();
    cols.assign(g.patch() * positions, T{});
    for (std::size_t c = 0; c < g.in_c; ++c) {
        for (std::size_t ky = 0; ky < kConvKernel; ++ky) {
            for (std::size_t kx = 0; kx < kConvKernel; ++kx) {
                T* row = cols.data() + ((c * kConvKernel + ky) * kConvKernel + kx) * positions;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - kConvPadding;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                    const T* src = image.data() + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - kConvPadding;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                        row[oy * g.out_w + ox] = src[ix];
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const AlignedVector<T>& cols, const ConvGeometry& g, std::span<T> image) {
    const std::size_t positions = g.positions();
    for (std::size_t c = 0; c < g.in_c; ++c) {
        for (std::size_t ky = 0; ky < kConvKernel; ++ky) {
            for (std::size_t kx = 0; kx < kConvKernel; ++kx) {
                const T* row = cols.data() + ((c * kConvKernel + ky) * kConvKernel + kx) * positions;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - kConvPadding;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
                    T* dst = image.data() + (c * g.in_h + static_cast<std::size_t>(iy)) * g.in_w;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) - kConvPadding;
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
                        dst[ix] += row[oy * g.out_w + ox];
                    }
                }
            }
        }
    }
}

template <typename T>
void require_same_shape(const BasicTensor4<T>& a, const Shape4& expected, const char* what) {
    if (a.shape() != expected) {
        throw ShapeError(std::string(what) + ": expected shape " + to_string(expected) + ", got " +
                         to_string(a.shape()));
    }
}

} // namespace

std::size_t conv_output_extent(std::size_t extent, std::size_t stride) {
    return (extent + 2 * kConvPadding - kConvKernel) / stride + 1;
}

template <typename T>
BasicTensor4<T> conv2d_forward(const BasicTensor4<T>& input, std::span<const T> weights, std::span<const T> bias,
                               std::size_t out_channels, std::size_t stride) {
    const Shape4& in = input.shape();
    const ConvGeometry g = conv_geometry(in, weights.size(), out_channels, stride);
    if (!bias.empty() && bias.size() != out_channels) throw ShapeError("conv2d: bias length mismatch");

    BasicTensor4<T> output(in.n, g.out_c, g.out_h, g.out_w);
    const ConstMapMatrix<T> w(weights.data(), static_cast<Eigen::Index>(g.out_c), static_cast<Eigen::Index>(g.patch()));
    AlignedVector<T> cols;
    for (std::size_t n = 0; n < in.n; ++n) {
        im2col(input.sample(n), g, cols);
        const ConstMapMatrix<T> c(cols.data(), static_cast<Eigen::Index>(g.patch()),
                                  static_cast<Eigen::Index>(g.positions()));
        MapMatrix<T> out(output.sample(n).data(), static_cast<Eigen::Index>(g.out_c),
                         static_cast<Eigen::Index>(g.positions()));
        out.noalias() = w * c;
        if (!bias.empty()) {
            for (std::size_t o = 0; o < g.out_c; ++o) out.row(static_cast<Eigen::Index>(o)).array() += bias[o];
        }
    }
    return output;
}

template <typename T>
LayerGrads<T> conv2d_backward(const BasicTensor4<T>& input, std::span<const T> weights, std::size_t out_channels,
                              std::size_t stride, const BasicTensor4<T>& upstream) {
    const Shape4& in = input.shape();
    const ConvGeometry g = conv_geometry(in, weights.size(), out_channels, stride);
    require_same_shape(upstream, Shape4{in.n, g.out_c, g.out_h, g.out_w}, "conv2d_backward");

    LayerGrads<T> grads{BasicTensor4<T>(in), std::vector<T>(weights.size(), T{}), std::vector<T>(out_channels, T{})};
    const auto rows = static_cast<Eigen::Index>(g.out_c);
    const auto patch = static_cast<Eigen::Index>(g.patch());
    const auto positions = static_cast<Eigen::Index>(g.positions());
    const ConstMapMatrix<T> w(weights.data(), rows, patch);
    MapMatrix<T> dw(grads.d_weights.data(), rows, patch);

    AlignedVector<T> cols;
    AlignedVector<T> dcols(g.patch() * g.positions());
    for (std::size_t n = 0; n < in.n; ++n) {
        im2col(input.sample(n), g, cols);
        const ConstMapMatrix<T> c(cols.data(), patch, positions);
        const ConstMapMatrix<T> up(upstream.sample(n).data(), rows, positions);
        dw.noalias() += up * c.transpose();
        for (std::size_t o = 0; o < g.out_c; ++o) grads.d_bias[o] += up.row(static_cast<Eigen::Index>(o)).sum();
        MapMatrix<T> dc(dcols.data(), patch, positions);
        dc.noalias() = w.transpose() * up;
        col2im_add(dcols, g, grads.d_input.sample(n));
    }
    return grads;
}

template <typename T>
MaxPoolForward<T> maxpool2_forward(const BasicTensor4<T>& input) {
    const Shape4& in = input.shape();
    if (in.h % 2 != 0 || in.w % 2 != 0) {
        throw ShapeError("maxpool2: spatial dims must be even, got " + to_string(in));
    }
    MaxPoolForward<T> result{BasicTensor4<T>(in.n, in.c, in.h / 2, in.w / 2), {}};
    result.argmax.resize(result.output.size());
    std::size_t out_idx = 0;
    for (std::size_t n = 0; n < in.n; ++n) {
        for (std::size_t c = 0; c < in.c; ++c) {
            for (std::size_t oy = 0; oy < in.h / 2; ++oy) {
                for (std::size_t ox = 0; ox < in.w / 2; ++ox, ++out_idx) {
                    const std::size_t base = ((n * in.c + c) * in.h + 2 * oy) * in.w + 2 * ox;
                    const std::size_t candidates[4] = {base, base + 1, base + in.w, base + in.w + 1};
                    std::size_t best = candidates[0];
                    for (std::size_t k = 1; k < 4; ++k) {
                        if (input[candidates[k]] > input[best]) best = candidates[k];
                    }
                    result.output[out_idx] = input[best];
                    result.argmax[out_idx] = static_cast<std::uint32_t>(best);
                }
            }
        }
    }
    return result;
}

template <typename T>
BasicTensor4<T> maxpool2_backward(const Shape4& input_shape, std::span<const std::uint32_t> argmax,
                                  const BasicTensor4<T>& upstream) {
    if (argmax.size() != upstream.size()) throw ShapeError("maxpool2_backward: argmax/upstream size mismatch");
    BasicTensor4<T> d_input(input_shape);
    for (std::size_t i = 0; i < upstream.size(); ++i) d_input[argmax[i]] += upstream[i];
    return d_input;
}

template <typename T>
BasicTensor4<T> dense_forward(const BasicTensor4<T>& input, std::span<const T> weights, std::span<const T> bias,
                              std::size_t out_features) {
    const std::size_t n = input.shape().n;
    const std::size_t in_features = input.shape().per_sample();
    if (weights.size() != in_features * out_features) {
        throw ShapeError("dense: weights of length " + std::to_string(weights.size()) + " do not match " +
                         std::to_string(in_features) + "x" + std::to_string(out_features));
    }
    if (!bias.empty() && bias.size() != out_features) throw ShapeError("dense: bias length mismatch");

    BasicTensor4<T> output(n, out_features, 1, 1);
    const ConstMapMatrix<T> x(input.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in_features));
    const ConstMapMatrix<T> w(weights.data(), static_cast<Eigen::Index>(in_features),
                              static_cast<Eigen::Index>(out_features));
    MapMatrix<T> y(output.data().data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_features));
    y.noalias() = x * w;
    if (!bias.empty()) {
        const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data(),
                                                                      static_cast<Eigen::Index>(out_features));
        y.rowwise() += b;
    }
    return output;
}

template <typename T>
LayerGrads<T> dense_backward(const BasicTensor4<T>& input, std::span<const T> weights, std::size_t out_features,
                             const BasicTensor4<T>& upstream) {
    const std::size_t n = input.shape().n;
    const std::size_t in_features = input.shape().per_sample();
    if (weights.size() != in_features * out_features) throw ShapeError("dense_backward: weight shape mismatch");
    require_same_shape(upstream, Shape4{n, out_features, 1, 1}, "dense_backward");

    LayerGrads<T> grads{BasicTensor4<T>(input.shape()), std::vector<T>(weights.size()), std::vector<T>(out_features)};
    const auto rn = static_cast<Eigen::Index>(n);
    const auto rin = static_cast<Eigen::Index>(in_features);
    const auto rout = static_cast<Eigen::Index>(out_features);
    const ConstMapMatrix<T> x(input.data().data(), rn, rin);
    const ConstMapMatrix<T> w(weights.data(), rin, rout);
    const ConstMapMatrix<T> dy(upstream.data().data(), rn, rout);
    MapMatrix<T>(grads.d_weights.data(), rin, rout).noalias() = x.transpose() * dy;
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>(grads.d_bias.data(), rout) = dy.colwise().sum();
    MapMatrix<T>(grads.d_input.data().data(), rn, rin).noalias() = dy * w.transpose();
    return grads;
}

template <typename T>
BasicTensor4<T> relu_forward(const BasicTensor4<T>& input) {
    BasicTensor4<T> out = input;
    for (auto& v : out.data()) v = v > T{} ? v : T{};
    return out;
}

template <typename T>
BasicTensor4<T> relu_backward(const BasicTensor4<T>& input, const BasicTensor4<T>& upstream) {
    require_same_shape(upstream, input.shape(), "relu_backward");
    BasicTensor4<T> d_input(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) d_input[i] = input[i] > T{} ? upstream[i] : T{};
    return d_input;
}

template <typename T>
BasicTensor4<T> flatten(const BasicTensor4<T>& input) {
    const Shape4& s = input.shape();
    return input.reshaped(Shape4{s.n, s.per_sample(), 1, 1});
}

template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor4<T>& logits, std::span<const int> labels) {
    const std::size_t n = logits.shape().n;
    const std::size_t classes = logits.shape().per_sample();
    if (labels.size() != n) throw ShapeError("softmax_cross_entropy: label count does not match batch");
    if (n == 0) throw ShapeError("softmax_cross_entropy: empty batch");

    LossResult<T> result{0.0, BasicTensor4<T>(logits.shape())};
    std::vector<double> probs(classes);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = labels[i];
        if (label < 0 || static_cast<std::size_t>(label) >= classes) {
            throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) + " outside [0, " +
                                    std::to_string(classes) + ")");
        }
        const auto row = logits.sample(i);
        const double peak = static_cast<double>(*std::max_element(row.begin(), row.end()));
        double total = 0.0;
        for (std::size_t k = 0; k < classes; ++k) {
            probs[k] = std::exp(static_cast<double>(row[k]) - peak);
            total += probs[k];
        }
        result.loss -= (static_cast<double>(row[static_cast<std::size_t>(label)]) - peak - std::log(total)) * inv_n;
        auto grad = result.d_logits.sample(i);
        for (std::size_t k = 0; k < classes; ++k) {
            const double onehot = k == static_cast<std::size_t>(label) ? 1.0 : 0.0;
            grad[k] = static_cast<T>((probs[k] / total - onehot) * inv_n);
        }
    }
    return result;
}

template <typename T>
SuPoolBatch<T> su_pool_forward(const BasicTensor4<T>& input, const GeneratorBasis& basis) {
    const std::size_t n = input.shape().n;
    if (input.shape().per_sample() != basis.size()) {
        throw ShapeError("su_pool: expected " + std::to_string(basis.size()) + " features, got " +
                         std::to_string(input.shape().per_sample()));
    }
    const auto width = static_cast<std::size_t>(2 * basis.d);
    SuPoolBatch<T> batch{BasicTensor4<T>(n, width, 1, 1), {}};
    batch.caches.reserve(n);
    std::vector<double> x(basis.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = input.sample(i);
        std::copy(src.begin(), src.end(), x.begin());
        PoolForward fwd = pool_forward(x, basis);
        auto dst = batch.output.sample(i);
        for (std::size_t j = 0; j < width; ++j) dst[j] = static_cast<T>(fwd.phi[j]);
        batch.caches.push_back(std::move(fwd.cache));
    }
    return batch;
}

template <typename T>
BasicTensor4<T> su_pool_backward(std::span<const PoolCache> caches, const BasicTensor4<T>& upstream,
                                 const GeneratorBasis& basis) {
    const std::size_t n = upstream.shape().n;
    const auto width = static_cast<std::size_t>(2 * basis.d);
    if (caches.size() != n || upstream.shape().per_sample() != width) {
        throw ShapeError("su_pool_backward: upstream shape " + to_string(upstream.shape()) + " does not match " +
                         std::to_string(caches.size()) + " cached samples of width " + std::to_string(width));
    }
    BasicTensor4<T> d_input(n, basis.size(), 1, 1);
    std::vector<double> up(width);
    for (std::size_t i = 0; i < n; ++i) {
        const auto src = upstream.sample(i);
        std::copy(src.begin(), src.end(), up.begin());
        const std::vector<double> grad = pool_backward(caches[i], up, basis);
        auto dst = d_input.sample(i);
        for (std::size_t k = 0; k < grad.size(); ++k) dst[k] = static_cast<T>(grad[k]);
    }
    return d_input;
}

std::string to_string(const Shape4& s) {
    return std::to_string(s.n) + "x" + std::to_string(s.c) + "x" + std::to_string(s.h) + "x" + std::to_string(s.w);
}

#define SUPOOL_INSTANTIATE_OPS(T)                                                                                   \
    template BasicTensor4<T> conv2d_forward<T>(const BasicTensor4<T>&, std::span<const T>, std::span<const T>,      \
                                               std::size_t, std::size_t);                                          \
    template LayerGrads<T> conv2d_backward<T>(const BasicTensor4<T>&, std::span<const T>, std::size_t, std::size_t, \
                                              const BasicTensor4<T>&);                                             \
    template MaxPoolForward<T> maxpool2_forward<T>(const BasicTensor4<T>&);                                         \
    template BasicTensor4<T> maxpool2_backward<T>(const Shape4&, std::span<const std::uint32_t>,                    \
                                                  const BasicTensor4<T>&);                                         \
    template BasicTensor4<T> dense_forward<T>(const BasicTensor4<T>&, std::span<const T>, std::span<const T>,       \
                                              std::size_t);                                                        \
    template LayerGrads<T> dense_backward<T>(const BasicTensor4<T>&, std::span<const T>, std::size_t,               \
                                             const BasicTensor4<T>&);                                              \
    template BasicTensor4<T> relu_forward<T>(const BasicTensor4<T>&);                                               \
    template BasicTensor4<T> relu_backward<T>(const BasicTensor4<T>&, const BasicTensor4<T>&);                      \
    template BasicTensor4<T> flatten<T>(const BasicTensor4<T>&);                                                    \
    template LossResult<T> softmax_cross_entropy<T>(const BasicTensor4<T>&, std::span<const int>);                  \
    template SuPoolBatch<T> su_pool_forward<T>(const BasicTensor4<T>&, const GeneratorBasis&);                      \
    template BasicTensor4<T> su_pool_backward<T>(std::span<const PoolCache>, const BasicTensor4<T>&,                \
                                                 const GeneratorBasis&);

SUPOOL_INSTANTIATE_OPS(float)
SUPOOL_INSTANTIATE_OPS(double)

#undef SUPOOL_INSTANTIATE_OPS

} // namespace supool
