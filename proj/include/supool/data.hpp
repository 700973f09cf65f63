#pragma once

#include "supool/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace supool {

struct Dataset {
    Tensor4 images;              // (n, c, h, w)
    std::vector<int> labels;     // n entries
    std::vector<std::string> class_names;

    std::size_t size() const noexcept { return labels.size(); }
    /// class_names.size() when names are present, otherwise max label + 1.
    std::size_t num_classes() const;
    Shape3 sample_shape() const { return {images.shape().c, images.shape().h, images.shape().w}; }
};

/// Throws std::invalid_argument when labels/images/names disagree.
void validate(const Dataset& ds);

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices);

// ---------------------------------------------------------------------------
// MSTF tensor file, little-endian:
//   "MSTF" | u32 version = 1 | u32 n, c, h, w | f32 x n*c*h*w | u16 x n labels
//   | u32 J | J bytes of metadata (class names, one per line)

inline constexpr std::uint32_t kMstfVersion = 1;

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_tensor_file(const Dataset& ds);
Dataset decode_tensor_file(std::span<const std::uint8_t> bytes);

void write_tensor_file(const std::filesystem::path& path, const Dataset& ds);
Dataset read_tensor_file(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Synthetic multispectral data

struct SynthConfig {
    std::size_t num_classes = 4;
    std::size_t samples_per_class = 100;
    std::size_t channels = 13;
    std::size_t height = 16;
    std::size_t width = 16;
    double spectral_noise = 0.1;
    double spatial_noise = 0.1;
    std::uint64_t seed = 0;
};

void validate(const SynthConfig& cfg);

/// Low-frequency spatial modulation 1 + 0.5 cos(2 pi (fy y / H + fx x / W) + phase).
struct SpatialPattern {
    int freq_y = 0;
    int freq_x = 0;
    double phase = 0.0;

    double at(std::size_t y, std::size_t x, std::size_t height, std::size_t width) const;
};

struct SynthClasses {
    std::vector<std::vector<double>> signatures; // per class, entries in [0, 1]
    std::vector<SpatialPattern> patterns;
    std::size_t redraws = 0; // signature candidates rejected for insufficient separation
};

/// Minimum pairwise distance enforced between class signatures: 0.5 sqrt(channels).
double min_signature_separation(std::size_t channels);

SynthClasses synth_classes(const SynthConfig& cfg);

/// Class-major samples: (signature + spectral_noise * N(0, 1)) * pattern + spatial_noise * N(0, 1).
Dataset synth_dataset(const SynthConfig& cfg);

// ---------------------------------------------------------------------------

struct DatasetSplit {
    Dataset train;
    Dataset test;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;
};

/// Stratified, seeded split; round(fraction * count) per class goes to train.
DatasetSplit split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed);

struct Standardized {
    Dataset train;
    Dataset test;
    std::vector<double> mean;
    std::vector<double> stddev;
};

inline constexpr double kStdFloor = 1e-6;

/// Per-channel (x - mean) / max(std, 1e-6) with statistics from train only.
Standardized standardize(const Dataset& train, const Dataset& test);

} // namespace supool
