#pragma once

// Forward/backward kernels for the layer kinds of the network engine.
// Instantiated for float (training) and double (gradient validation).

#include "supool/su_pool.hpp"
#include "supool/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace supool {

inline constexpr std::size_t kConvKernel = 3;
inline constexpr std::size_t kConvPadding = 1;

/// floor((extent + 2 * padding - kernel) / stride) + 1
std::size_t conv_output_extent(std::size_t extent, std::size_t stride);

template <typename T>
struct LayerGrads {
    BasicTensor4<T> d_input;
    std::vector<T> d_weights;
    std::vector<T> d_bias;
};

/// 3x3 convolution, padding 1. Weights are laid out (out, in, 3, 3);
/// `bias` may be empty.
template <typename T>
BasicTensor4<T> conv2d_forward(const BasicTensor4<T>& input, std::span<const T> weights, std::span<const T> bias,
                               std::size_t out_channels, std::size_t stride);

template <typename T>
LayerGrads<T> conv2d_backward(const BasicTensor4<T>& input, std::span<const T> weights, std::size_t out_channels,
                              std::size_t stride, const BasicTensor4<T>& upstream);

template <typename T>
struct MaxPoolForward {
    BasicTensor4<T> output;
    std::vector<std::uint32_t> argmax; // flat input index per output element
};

/// 2x2 windows, stride 2. Ties go to the first element in row-major window order.
template <typename T>
MaxPoolForward<T> maxpool2_forward(const BasicTensor4<T>& input);

template <typename T>
BasicTensor4<T> maxpool2_backward(const Shape4& input_shape, std::span<const std::uint32_t> argmax,
                                  const BasicTensor4<T>& upstream);

/// y = x W + b with W laid out (in_features, out_features). Any input shape
/// is read as n x (c * h * w).
template <typename T>
BasicTensor4<T> dense_forward(const BasicTensor4<T>& input, std::span<const T> weights, std::span<const T> bias,
                              std::size_t out_features);

template <typename T>
LayerGrads<T> dense_backward(const BasicTensor4<T>& input, std::span<const T> weights, std::size_t out_features,
                             const BasicTensor4<T>& upstream);

template <typename T>
BasicTensor4<T> relu_forward(const BasicTensor4<T>& input);

/// Subgradient 0 at input == 0.
template <typename T>
BasicTensor4<T> relu_backward(const BasicTensor4<T>& input, const BasicTensor4<T>& upstream);

/// (n, c, h, w) -> (n, c * h * w, 1, 1), row-major order preserved.
template <typename T>
BasicTensor4<T> flatten(const BasicTensor4<T>& input);

template <typename T>
struct LossResult {
    double loss = 0.0;
    BasicTensor4<T> d_logits;
};

/// Mean softmax cross-entropy over the batch; d_logits = (softmax - onehot) / n.
template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor4<T>& logits, std::span<const int> labels);

template <typename T>
struct SuPoolBatch {
    BasicTensor4<T> output; // (n, 2d, 1, 1)
    std::vector<PoolCache> caches;
};

/// Applies pool_forward per sample in double precision.
template <typename T>
SuPoolBatch<T> su_pool_forward(const BasicTensor4<T>& input, const GeneratorBasis& basis);

template <typename T>
BasicTensor4<T> su_pool_backward(std::span<const PoolCache> caches, const BasicTensor4<T>& upstream,
                                 const GeneratorBasis& basis);

} // namespace supool
