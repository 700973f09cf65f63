#include "supool/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <random>

namespace supool {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t remaining() const { return bytes_.size() - pos_; }

    std::span<const std::uint8_t> take(std::size_t n, const char* what) {
        if (remaining() < n) throw FormatError(std::string("MSTF: truncated file while reading ") + what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::uint32_t u32(const char* what) {
        auto b = take(4, what);
        return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
               static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        const std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

} // namespace

// ---------------------------------------------------------------------------

std::size_t Dataset::num_classes() const {
    if (!class_names.empty()) return class_names.size();
    if (labels.empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

void validate(const Dataset& ds) {
    if (ds.labels.size() != ds.images.shape().n) {
        throw std::invalid_argument("dataset: " + std::to_string(ds.labels.size()) + " labels for " +
                                    std::to_string(ds.images.shape().n) + " images");
    }
    for (int label : ds.labels) {
        if (label < 0) throw std::invalid_argument("dataset: negative label");
        if (!ds.class_names.empty() && static_cast<std::size_t>(label) >= ds.class_names.size()) {
            throw std::invalid_argument("dataset: label " + std::to_string(label) + " has no class name");
        }
    }
    for (const auto& name : ds.class_names) {
        if (name.find('\n') != std::string::npos) throw std::invalid_argument("dataset: class name contains newline");
    }
}

Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
    const Shape4& s = ds.images.shape();
    Dataset out;
    out.images = Tensor4(indices.size(), s.c, s.h, s.w);
    out.labels.reserve(indices.size());
    out.class_names = ds.class_names;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= s.n) throw std::out_of_range("subset: index out of range");
        const auto src = ds.images.sample(indices[i]);
        std::copy(src.begin(), src.end(), out.images.sample(i).begin());
        out.labels.push_back(ds.labels[indices[i]]);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_tensor_file(const Dataset& ds) {
    validate(ds);
    const Shape4& s = ds.images.shape();
    for (auto dim : {s.n, s.c, s.h, s.w}) {
        if (dim > 0xFFFFFFFFu) throw FormatError("MSTF: dimension exceeds u32");
    }
    std::string meta;
    for (const auto& name : ds.class_names) {
        meta += name;
        meta += '\n';
    }

    std::vector<std::uint8_t> out;
    out.reserve(24 + 4 * ds.images.size() + 2 * ds.labels.size() + 4 + meta.size());
    out.insert(out.end(), {'M', 'S', 'T', 'F'});
    put_u32(out, kMstfVersion);
    for (auto dim : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<std::uint32_t>(dim));
    for (float v : ds.images.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
    for (int label : ds.labels) {
        if (label > 0xFFFF) throw FormatError("MSTF: label " + std::to_string(label) + " does not fit in u16");
        put_u16(out, static_cast<std::uint16_t>(label));
    }
    put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out.insert(out.end(), meta.begin(), meta.end());
    return out;
}

Dataset decode_tensor_file(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const auto magic = r.take(4, "magic");
    if (std::memcmp(magic.data(), "MSTF", 4) != 0) throw FormatError("MSTF: bad magic");
    const std::uint32_t version = r.u32("version");
    if (version != kMstfVersion) throw FormatError("MSTF: unsupported version " + std::to_string(version));

    std::uint64_t dims[4];
    for (auto& d : dims) d = r.u32("dimensions");
    // Each factor is < 2^32, so check the running product against the bytes actually present.
    std::uint64_t count = 1;
    for (auto d : dims) {
        if (d != 0 && count > r.remaining() / d) throw FormatError("MSTF: dimensions exceed file size");
        count *= d;
    }
    if (count > r.remaining() / 4) throw FormatError("MSTF: truncated file while reading image data");

    Dataset ds;
    ds.images = Tensor4(static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                        static_cast<std::size_t>(dims[2]), static_cast<std::size_t>(dims[3]));
    const auto payload = r.take(static_cast<std::size_t>(count) * 4, "image data");
    auto values = ds.images.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint32_t bits = static_cast<std::uint32_t>(payload[4 * i]) |
                                   static_cast<std::uint32_t>(payload[4 * i + 1]) << 8 |
                                   static_cast<std::uint32_t>(payload[4 * i + 2]) << 16 |
                                   static_cast<std::uint32_t>(payload[4 * i + 3]) << 24;
        values[i] = std::bit_cast<float>(bits);
        if (!std::isfinite(values[i])) throw FormatError("MSTF: non-finite pixel value");
    }

    const auto labels = r.take(static_cast<std::size_t>(dims[0]) * 2, "labels");
    ds.labels.resize(static_cast<std::size_t>(dims[0]));
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        ds.labels[i] = static_cast<int>(labels[2 * i]) | static_cast<int>(labels[2 * i + 1]) << 8;
    }

    const std::uint32_t meta_len = r.u32("metadata length");
    const auto meta = r.take(meta_len, "metadata");
    if (r.remaining() != 0) throw FormatError("MSTF: trailing bytes after metadata");
    ds.class_names = split_lines(std::string_view(reinterpret_cast<const char*>(meta.data()), meta.size()));

    try {
        validate(ds);
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("MSTF: ") + e.what());
    }
    return ds;
}

void write_tensor_file(const std::filesystem::path& path, const Dataset& ds) {
    const auto bytes = encode_tensor_file(ds);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Dataset read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_tensor_file(bytes);
}

// ---------------------------------------------------------------------------

void validate(const SynthConfig& cfg) {
    if (cfg.num_classes == 0 || cfg.samples_per_class == 0 || cfg.channels == 0 || cfg.height == 0 ||
        cfg.width == 0) {
        throw std::invalid_argument("synth: class count, samples and dimensions must be positive");
    }
    if (!std::isfinite(cfg.spectral_noise) || !std::isfinite(cfg.spatial_noise) || cfg.spectral_noise < 0.0 ||
        cfg.spatial_noise < 0.0) {
        throw std::invalid_argument("synth: noise levels must be finite and non-negative");
    }
    if (cfg.num_classes > 0xFFFF) throw std::invalid_argument("synth: too many classes");
}

double SpatialPattern::at(std::size_t y, std::size_t x, std::size_t height, std::size_t width) const {
    const double arg = 2.0 * std::numbers::pi *
                           (freq_y * static_cast<double>(y) / static_cast<double>(height) +
                            freq_x * static_cast<double>(x) / static_cast<double>(width)) +
                       phase;
    return 1.0 + 0.5 * std::cos(arg);
}

double min_signature_separation(std::size_t channels) { return 0.5 * std::sqrt(static_cast<double>(channels)); }

SynthClasses synth_classes(const SynthConfig& cfg) {
    validate(cfg);
    constexpr std::size_t kMaxDrawsPerClass = 100'000;
    auto rng = seeded(cfg.seed, 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    const double separation = min_signature_separation(cfg.channels);

    SynthClasses out;
    // Entries sit near one end of [0, 1] so that well-separated signatures are cheap to find.
    auto draw_signature = [&] {
        std::vector<double> sig(cfg.channels);
        for (auto& v : sig) {
            const double offset = 0.3 * unit(rng);
            v = coin(rng) ? 1.0 - offset : offset;
        }
        return sig;
    };
    for (std::size_t k = 0; k < cfg.num_classes; ++k) {
        std::size_t draws = 0;
        for (;;) {
            if (++draws > kMaxDrawsPerClass) {
                throw std::runtime_error("synth: could not place " + std::to_string(cfg.num_classes) +
                                         " signatures with the required separation");
            }
            std::vector<double> candidate = draw_signature();
            const bool separated = std::all_of(out.signatures.begin(), out.signatures.end(), [&](const auto& other) {
                double acc = 0.0;
                for (std::size_t c = 0; c < cfg.channels; ++c) acc += (candidate[c] - other[c]) * (candidate[c] - other[c]);
                return std::sqrt(acc) >= separation;
            });
            if (separated) {
                out.signatures.push_back(std::move(candidate));
                break;
            }
            ++out.redraws;
        }
    }

    std::uniform_int_distribution<int> freq(0, 2);
    for (std::size_t k = 0; k < cfg.num_classes; ++k) {
        SpatialPattern p;
        do {
            p.freq_y = freq(rng);
            p.freq_x = freq(rng);
        } while (p.freq_y == 0 && p.freq_x == 0);
        p.phase = 2.0 * std::numbers::pi * unit(rng);
        out.patterns.push_back(p);
    }
    return out;
}

Dataset synth_dataset(const SynthConfig& cfg) {
    const SynthClasses classes = synth_classes(cfg);
    const std::size_t n = cfg.num_classes * cfg.samples_per_class;
    Dataset ds;
    ds.images = Tensor4(n, cfg.channels, cfg.height, cfg.width);
    ds.labels.reserve(n);
    for (std::size_t k = 0; k < cfg.num_classes; ++k) ds.class_names.push_back("class_" + std::to_string(k));

    std::vector<double> pattern(cfg.height * cfg.width);
    auto rng = seeded(cfg.seed, 2);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> spectrum(cfg.channels);
    std::size_t i = 0;
    for (std::size_t k = 0; k < cfg.num_classes; ++k) {
        for (std::size_t y = 0; y < cfg.height; ++y) {
            for (std::size_t x = 0; x < cfg.width; ++x) {
                pattern[y * cfg.width + x] = classes.patterns[k].at(y, x, cfg.height, cfg.width);
            }
        }
        for (std::size_t s = 0; s < cfg.samples_per_class; ++s, ++i) {
            for (std::size_t c = 0; c < cfg.channels; ++c) {
                spectrum[c] = classes.signatures[k][c] + cfg.spectral_noise * gauss(rng);
            }
            auto img = ds.images.sample(i);
            for (std::size_t c = 0; c < cfg.channels; ++c) {
                for (std::size_t p = 0; p < pattern.size(); ++p) {
                    img[c * pattern.size() + p] =
                        static_cast<float>(spectrum[c] * pattern[p] + cfg.spatial_noise * gauss(rng));
                }
            }
            ds.labels.push_back(static_cast<int>(k));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------

DatasetSplit split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split: train fraction must lie in (0, 1)");
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.labels.size(); ++i) by_class[ds.labels[i]].push_back(i);

    auto rng = seeded(seed, 3);
    DatasetSplit split;
    for (auto& [label, members] : by_class) {
        if (members.size() < 2) {
            throw std::invalid_argument("split: class " + std::to_string(label) + " has fewer than 2 samples");
        }
        std::shuffle(members.begin(), members.end(), rng);
        auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
        split.train_indices.insert(split.train_indices.end(), members.begin(), members.begin() + n_train);
        split.test_indices.insert(split.test_indices.end(), members.begin() + n_train, members.end());
    }
    std::sort(split.train_indices.begin(), split.train_indices.end());
    std::sort(split.test_indices.begin(), split.test_indices.end());
    split.train = subset(ds, split.train_indices);
    split.test = subset(ds, split.test_indices);
    return split;
}

Standardized standardize(const Dataset& train, const Dataset& test) {
    const Shape4& s = train.images.shape();
    if (s.n == 0) throw std::invalid_argument("standardize: empty training set");
    const Shape4& t = test.images.shape();
    if (t.c != s.c || t.h != s.h || t.w != s.w) throw ShapeError("standardize: train/test sample shapes differ");

    const std::size_t plane = s.h * s.w;
    Standardized out{train, test, std::vector<double>(s.c, 0.0), std::vector<double>(s.c, 0.0)};
    for (std::size_t c = 0; c < s.c; ++c) {
        double sum = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
            const auto img = train.images.sample(n);
            for (std::size_t p = 0; p < plane; ++p) sum += img[c * plane + p];
        }
        const double count = static_cast<double>(s.n * plane);
        const double mean = sum / count;
        double sq = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
            const auto img = train.images.sample(n);
            for (std::size_t p = 0; p < plane; ++p) {
                const double dv = img[c * plane + p] - mean;
                sq += dv * dv;
            }
        }
        out.mean[c] = mean;
        out.stddev[c] = std::sqrt(sq / count);
    }

    auto apply = [&](Tensor4& images) {
        for (std::size_t n = 0; n < images.shape().n; ++n) {
            auto img = images.sample(n);
            for (std::size_t c = 0; c < s.c; ++c) {
                const double scale = 1.0 / std::max(out.stddev[c], kStdFloor);
                for (std::size_t p = 0; p < plane; ++p) {
                    img[c * plane + p] = static_cast<float>((img[c * plane + p] - out.mean[c]) * scale);
                }
            }
        }
    };
    apply(out.train.images);
    apply(out.test.images);
    return out;
}

} // namespace supool
