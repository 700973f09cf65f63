#include "supool/data.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

using namespace supool;

namespace {

Dataset small_dataset(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> dist;
    Dataset ds;
    ds.images = Tensor4(n, c, h, w);
    for (float& v : ds.images.data()) v = dist(rng);
    ds.class_names = {"forest", "river", "sea_lake"};
    for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(i % 3));
    return ds;
}

void put_u32_at(std::vector<std::uint8_t>& bytes, std::size_t offset, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes[offset + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v >> (8 * i));
}

SynthConfig synth(std::size_t classes, std::size_t per_class) {
    SynthConfig cfg;
    cfg.num_classes = classes;
    cfg.samples_per_class = per_class;
    return cfg;
}

} // namespace

TEST(Mstf, RoundTripIsByteExact) {
    const Dataset ds = small_dataset(2, 13, 16, 16, 1);
    const auto bytes = encode_tensor_file(ds);
    const Dataset back = decode_tensor_file(bytes);
    EXPECT_EQ(back.images, ds.images);
    EXPECT_EQ(back.labels, ds.labels);
    EXPECT_EQ(back.class_names, ds.class_names);
    EXPECT_EQ(encode_tensor_file(back), bytes);
}

TEST(Mstf, FileRoundTrip) {
    const auto path = std::filesystem::temp_directory_path() / "supool_test_roundtrip.mstf";
    const Dataset ds = small_dataset(5, 3, 4, 4, 2);
    write_tensor_file(path, ds);
    const Dataset back = read_tensor_file(path);
    EXPECT_EQ(encode_tensor_file(back), encode_tensor_file(ds));
    std::filesystem::remove(path);
    EXPECT_THROW(read_tensor_file(path), std::runtime_error);
}

TEST(Mstf, LayoutIsLittleEndian) {
    Dataset ds;
    ds.images = Tensor4(Shape4{1, 1, 1, 1}, std::vector<float>{1.0f});
    ds.labels = {0};
    const auto bytes = encode_tensor_file(ds);
    const std::vector<std::uint8_t> expected{'M', 'S', 'T', 'F', 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0,
                                             0,   1,   0,   0,   0, 0, 0, 0x80, 0x3f, 0, 0, 0, 0, 0, 0};
    EXPECT_EQ(bytes, expected);
}

TEST(Mstf, EmptyMetadataHasZeroLength) {
    Dataset ds = small_dataset(3, 1, 2, 2, 3);
    ds.class_names.clear();
    const auto bytes = encode_tensor_file(ds);
    std::uint32_t j = 0;
    std::memcpy(&j, bytes.data() + bytes.size() - 4, 4);
    EXPECT_EQ(j, 0u);
    EXPECT_EQ(decode_tensor_file(bytes).num_classes(), 3u);
}

TEST(Mstf, BadMagic) {
    auto bytes = encode_tensor_file(small_dataset(2, 1, 2, 2, 4));
    std::memcpy(bytes.data(), "XXXX", 4);
    EXPECT_THROW(decode_tensor_file(bytes), FormatError);
}

TEST(Mstf, RejectsEveryTruncation) {
    const auto bytes = encode_tensor_file(small_dataset(3, 2, 2, 2, 5));
    for (std::size_t len = 0; len < bytes.size(); ++len) {
        EXPECT_THROW(decode_tensor_file(std::span(bytes).first(len)), FormatError) << "length " << len;
    }
}

TEST(Mstf, RejectsCorruptedHeadersAndPayload) {
    const Dataset ds = small_dataset(3, 2, 2, 2, 6);
    const auto good = encode_tensor_file(ds);
    const std::size_t data_offset = 24;
    const std::size_t label_offset = data_offset + 4 * ds.images.size();
    const std::size_t meta_len_offset = label_offset + 2 * ds.labels.size();

    std::vector<std::vector<std::uint8_t>> corpus;
    auto variant = [&](auto mutate) {
        auto b = good;
        mutate(b);
        corpus.push_back(std::move(b));
    };
    variant([](auto& b) { put_u32_at(b, 4, 2); });                    // version
    variant([](auto& b) { put_u32_at(b, 4, 0); });
    for (std::size_t dim = 0; dim < 4; ++dim) {
        variant([&](auto& b) { put_u32_at(b, 8 + 4 * dim, 0xFFFFFFFFu); });
        variant([&](auto& b) { put_u32_at(b, 8 + 4 * dim, 1000); });
        variant([&](auto& b) { put_u32_at(b, 8 + 4 * dim, 0x10000); });
    }
    variant([&](auto& b) { put_u32_at(b, data_offset, 0x7FC00000u); }); // NaN
    variant([&](auto& b) { put_u32_at(b, data_offset + 4, 0x7F800000u); }); // +inf
    variant([&](auto& b) {
        b[label_offset] = 7;                                             // label without a class name
        b[label_offset + 1] = 0;
    });
    variant([&](auto& b) { put_u32_at(b, meta_len_offset, 1000); });
    variant([&](auto& b) { put_u32_at(b, meta_len_offset, 0xFFFFFFFFu); });
    variant([](auto& b) { b.push_back(0); });                        // trailing byte
    variant([](auto& b) { b.insert(b.end(), {'x', '\n'}); });

    for (std::size_t i = 0; i < corpus.size(); ++i) {
        EXPECT_THROW(decode_tensor_file(corpus[i]), FormatError) << "corpus entry " << i;
    }
}

TEST(Mstf, RandomByteFlipsNeverCrash) {
    const auto good = encode_tensor_file(small_dataset(4, 2, 2, 2, 7));
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> pos(0, good.size() - 1);
    std::uniform_int_distribution<int> byte(0, 255);
    for (int t = 0; t < 2000; ++t) {
        auto b = good;
        for (int k = 0; k < 3; ++k) b[pos(rng)] = static_cast<std::uint8_t>(byte(rng));
        try {
            const Dataset ds = decode_tensor_file(b);
            EXPECT_NO_THROW(validate(ds));
        } catch (const FormatError&) {
        }
    }
}

TEST(Dataset, ValidateAndSubset) {
    Dataset ds = small_dataset(6, 1, 2, 2, 9);
    EXPECT_NO_THROW(validate(ds));
    const std::vector<std::size_t> idx{5, 0};
    const Dataset sub = subset(ds, idx);
    EXPECT_EQ(sub.size(), 2u);
    EXPECT_EQ(sub.labels, (std::vector<int>{2, 0}));
    EXPECT_TRUE(std::equal(sub.images.sample(0).begin(), sub.images.sample(0).end(), ds.images.sample(5).begin()));
    const std::vector<std::size_t> bad{6};
    EXPECT_THROW(subset(ds, bad), std::out_of_range);
    ds.labels.pop_back();
    EXPECT_THROW(validate(ds), std::invalid_argument);
}

TEST(Synth, NoiselessClassesAreConstant) {
    SynthConfig cfg = synth(3, 4);
    cfg.spectral_noise = 0.0;
    cfg.spatial_noise = 0.0;
    const Dataset ds = synth_dataset(cfg);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const std::size_t first = static_cast<std::size_t>(ds.labels[i]) * cfg.samples_per_class;
        EXPECT_TRUE(std::equal(ds.images.sample(i).begin(), ds.images.sample(i).end(),
                               ds.images.sample(first).begin()));
    }
}

TEST(Synth, SameSeedIsBitIdentical) {
    const SynthConfig cfg = synth(4, 10);
    EXPECT_EQ(encode_tensor_file(synth_dataset(cfg)), encode_tensor_file(synth_dataset(cfg)));
    SynthConfig other = cfg;
    other.seed = 1;
    EXPECT_NE(encode_tensor_file(synth_dataset(cfg)), encode_tensor_file(synth_dataset(other)));
}

TEST(Synth, ShapeLabelsAndNames) {
    const Dataset ds = synth_dataset(synth(4, 5));
    EXPECT_EQ(ds.images.shape(), (Shape4{20, 13, 16, 16}));
    EXPECT_EQ(ds.class_names.size(), 4u);
    EXPECT_EQ(ds.class_names[2], "class_2");
    EXPECT_EQ(ds.labels[0], 0);
    EXPECT_EQ(ds.labels[19], 3);
}

TEST(Synth, SignaturesAreSeparated) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SynthConfig cfg = synth(10, 1);
        cfg.seed = seed;
        const SynthClasses classes = synth_classes(cfg);
        const double min_sep = min_signature_separation(cfg.channels);
        for (std::size_t a = 0; a < classes.signatures.size(); ++a) {
            for (double v : classes.signatures[a]) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
            for (std::size_t b = a + 1; b < classes.signatures.size(); ++b) {
                double d2 = 0.0;
                for (std::size_t c = 0; c < cfg.channels; ++c) {
                    const double diff = classes.signatures[a][c] - classes.signatures[b][c];
                    d2 += diff * diff;
                }
                EXPECT_GE(std::sqrt(d2), min_sep);
            }
        }
        EXPECT_EQ(synth_classes(cfg).redraws, classes.redraws);
    }
}

TEST(Synth, NearestCentroidOnChannelMeans) {
    const Dataset ds = synth_dataset(synth(4, 100));
    const Shape4& s = ds.images.shape();
    const std::size_t hw = s.h * s.w;
    std::vector<std::vector<double>> features(ds.size(), std::vector<double>(s.c, 0.0));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto x = ds.images.sample(i);
        for (std::size_t c = 0; c < s.c; ++c) {
            features[i][c] = std::accumulate(x.begin() + static_cast<long>(c * hw),
                                             x.begin() + static_cast<long>((c + 1) * hw), 0.0) /
                             static_cast<double>(hw);
        }
    }
    std::vector<std::vector<double>> centroid(4, std::vector<double>(s.c, 0.0));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t c = 0; c < s.c; ++c) centroid[static_cast<std::size_t>(ds.labels[i])][c] += features[i][c] / 100.0;
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < 4; ++k) {
            double d = 0.0;
            for (std::size_t c = 0; c < s.c; ++c) d += (features[i][c] - centroid[k][c]) * (features[i][c] - centroid[k][c]);
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        if (static_cast<int>(best) == ds.labels[i]) ++correct;
    }
    EXPECT_GE(static_cast<double>(correct) / static_cast<double>(ds.size()), 0.95);
}

TEST(Synth, RejectsBadConfig) {
    SynthConfig cfg = synth(0, 10);
    EXPECT_THROW(synth_dataset(cfg), std::invalid_argument);
    cfg = synth(2, 10);
    cfg.spatial_noise = -1.0;
    EXPECT_THROW(synth_dataset(cfg), std::invalid_argument);
}

TEST(Split, EightyTwentyPerClass) {
    const Dataset ds = synth_dataset(synth(4, 100));
    const DatasetSplit split = split_dataset(ds, 0.8, 0);
    EXPECT_EQ(split.train.size(), 320u);
    EXPECT_EQ(split.test.size(), 80u);
    std::vector<int> train_counts(4, 0), test_counts(4, 0);
    for (int l : split.train.labels) ++train_counts[static_cast<std::size_t>(l)];
    for (int l : split.test.labels) ++test_counts[static_cast<std::size_t>(l)];
    EXPECT_EQ(train_counts, (std::vector<int>{80, 80, 80, 80}));
    EXPECT_EQ(test_counts, (std::vector<int>{20, 20, 20, 20}));
}

TEST(Split, PartitionsIndices) {
    const Dataset ds = small_dataset(31, 1, 2, 2, 10);
    const DatasetSplit split = split_dataset(ds, 0.7, 3);
    std::set<std::size_t> all(split.train_indices.begin(), split.train_indices.end());
    for (std::size_t i : split.test_indices) EXPECT_TRUE(all.insert(i).second) << "index in both sets";
    EXPECT_EQ(all.size(), ds.size());
    EXPECT_EQ(*all.rbegin(), ds.size() - 1);
}

TEST(Split, ProportionsWithinOneWhenNotDivisible) {
    const Dataset ds = small_dataset(31, 1, 2, 2, 11); // class sizes 11, 10, 10
    const DatasetSplit split = split_dataset(ds, 0.75, 1);
    std::vector<int> counts(3, 0), totals(3, 0);
    for (int l : split.train.labels) ++counts[static_cast<std::size_t>(l)];
    for (int l : ds.labels) ++totals[static_cast<std::size_t>(l)];
    for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(std::abs(counts[k] - 0.75 * totals[k]), 1.0);
}

TEST(Split, DeterministicAndSeedDependent) {
    const Dataset ds = small_dataset(60, 1, 2, 2, 12);
    EXPECT_EQ(split_dataset(ds, 0.8, 5).train_indices, split_dataset(ds, 0.8, 5).train_indices);
    EXPECT_NE(split_dataset(ds, 0.8, 5).train_indices, split_dataset(ds, 0.8, 6).train_indices);
    EXPECT_THROW(split_dataset(ds, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(split_dataset(ds, 0.0, 0), std::invalid_argument);
}

TEST(Standardize, TrainStatisticsOnly) {
    const Dataset train = small_dataset(40, 3, 4, 4, 13);
    Dataset test = small_dataset(10, 3, 4, 4, 14);
    for (float& v : test.images.data()) v += 5.0f;
    const Standardized st = standardize(train, test);

    const Shape4& s = st.train.images.shape();
    const std::size_t hw = s.h * s.w;
    for (std::size_t c = 0; c < s.c; ++c) {
        double sum = 0.0, sq = 0.0;
        for (std::size_t n = 0; n < s.n; ++n) {
            for (std::size_t i = 0; i < hw; ++i) {
                const double v = st.train.images.sample(n)[c * hw + i];
                sum += v;
                sq += v * v;
            }
        }
        const double count = static_cast<double>(s.n * hw);
        EXPECT_NEAR(sum / count, 0.0, 1e-5);
        EXPECT_NEAR(std::sqrt(sq / count - (sum / count) * (sum / count)), 1.0, 1e-3);
    }
    // The shift survives because test uses the train statistics.
    double test_mean = 0.0;
    for (float v : st.test.images.data()) test_mean += v;
    test_mean /= static_cast<double>(st.test.images.size());
    EXPECT_GT(test_mean, 3.0);
}

TEST(Standardize, ConstantChannelMapsToZero) {
    Dataset train = small_dataset(8, 2, 2, 2, 15);
    for (std::size_t n = 0; n < 8; ++n) {
        for (std::size_t i = 0; i < 4; ++i) train.images.sample(n)[i] = 3.0f;
    }
    const Standardized st = standardize(train, train);
    EXPECT_NEAR(st.stddev[0], 0.0, 1e-12);
    for (std::size_t n = 0; n < 8; ++n) {
        for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(st.train.images.sample(n)[i], 0.0f);
    }
    for (float v : st.train.images.data()) EXPECT_TRUE(std::isfinite(v));
}
