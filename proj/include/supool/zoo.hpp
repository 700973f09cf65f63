#pragma once

#include "supool/network.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace supool {

/// The five benchmark architectures.
///   M1 shallow strided CNN, classical (d^2-1) -> 2d bottleneck
///   M2 deep conv-pool CNN, same classical bottleneck
///   M3 deep conv-pool CNN, wide head 256 -> 128 -> 64
///   M4 M1 backbone with SU(d) pooling
///   M5 deep CNN (two pooling stages) with SU(d) pooling
enum class ModelId { M1, M2, M3, M4, M5 };

inline constexpr ModelId kAllModels[] = {ModelId::M1, ModelId::M2, ModelId::M3, ModelId::M4, ModelId::M5};

std::string to_string(ModelId id);
ModelId parse_model_id(std::string_view text);
std::string model_title(ModelId id);

struct ModelSpec {
    ModelId id = ModelId::M4;
    int d = 3;
    Shape3 input{13, 64, 64};
    std::size_t num_classes = 10;
};

/// Full layer list, activations included.
std::vector<LayerSpec> model_layers(const ModelSpec& spec);

Network build_model(const ModelSpec& spec, std::uint64_t seed);

std::size_t count_params(const Network& net);
/// Same count, derived from the layer specs alone.
std::size_t count_params(const ModelSpec& spec);

/// Width of the Flatten output for the given spec.
std::size_t flatten_width(const ModelSpec& spec);

/// Parameter counts listed in the published results table (13x64x64 input, d = 3, 10 classes).
std::size_t published_param_count(ModelId id);

} // namespace supool
