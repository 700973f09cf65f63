#include "supool/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

using namespace supool;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("supool_harness_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.models = {ModelId::M4};
    cfg.synth.num_classes = 2;
    cfg.synth.samples_per_class = 5;
    cfg.synth.height = 8;
    cfg.synth.width = 8;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.seeds = {1, 2};
    return cfg;
}

RunMetrics fake_run(ModelId model, std::uint64_t seed, std::vector<double> test_acc) {
    RunMetrics m;
    m.model = model;
    m.seed = seed;
    m.param_count = 100;
    m.epochs = test_acc.size();
    m.batch_size = 64;
    m.lr = 1e-3;
    m.data_source = "fake";
    m.thresholds = {0.8, 0.9};
    m.test_accuracy = std::move(test_acc);
    m.train_accuracy = m.test_accuracy;
    m.train_loss.assign(m.test_accuracy.size(), 0.5);
    m.epoch_seconds.assign(m.test_accuracy.size(), 0.0);
    finalize(m);
    return m;
}

} // namespace

TEST(EpochsToThreshold, Examples) {
    EXPECT_EQ(epochs_to_threshold(std::vector<double>{0.5, 0.85, 0.92}, 0.9), 3);
    EXPECT_EQ(epochs_to_threshold(std::vector<double>{0.95, 0.5}, 0.9), 1);
    EXPECT_EQ(epochs_to_threshold(std::vector<double>{0.1, 0.2}, 0.9), std::nullopt);
    EXPECT_THROW(epochs_to_threshold(std::vector<double>{}, 0.9), std::invalid_argument);
    EXPECT_THROW(epochs_to_threshold(std::vector<double>{0.5}, 1.0), std::invalid_argument);
    EXPECT_THROW(epochs_to_threshold(std::vector<double>{0.5}, 0.0), std::invalid_argument);
}

TEST(EpochsToThreshold, MonotoneInThreshold) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> acc(0.0, 1.0);
    const auto key = [](std::optional<int> r) { return r ? *r : std::numeric_limits<int>::max(); };
    for (int t = 0; t < 200; ++t) {
        std::vector<double> h(10);
        for (double& v : h) v = acc(rng);
        for (double a = 0.05; a < 0.95; a += 0.05) {
            EXPECT_LE(key(epochs_to_threshold(h, a)), key(epochs_to_threshold(h, a + 0.04)));
        }
    }
}

TEST(Finalize, PeakEpochIsConsistent) {
    const RunMetrics m = fake_run(ModelId::M1, 1, {0.3, 0.91, 0.85, 0.91});
    ASSERT_TRUE(m.peak_epoch);
    EXPECT_EQ(*m.peak_epoch, 2);
    EXPECT_EQ(m.test_accuracy[static_cast<std::size_t>(*m.peak_epoch - 1)], m.max_test_accuracy);
    EXPECT_EQ(m.epochs_to_threshold, (std::vector<std::optional<int>>{2, 2}));
}

TEST(Summarize, ConstantHasZeroSpread) {
    const Summary s = summarize({4.0, 4.0, 4.0, 4.0});
    EXPECT_EQ(s.count, 4u);
    EXPECT_EQ(s.mean, 4.0);
    EXPECT_EQ(s.median, 4.0);
    EXPECT_EQ(s.stddev, 0.0);
}

TEST(Summarize, SampleStatistics) {
    const Summary s = summarize({1.0, 2.0, 3.0, 10.0});
    EXPECT_DOUBLE_EQ(s.mean, 4.0);
    EXPECT_DOUBLE_EQ(s.median, 2.5);
    EXPECT_NEAR(s.stddev, std::sqrt(50.0 / 3.0), 1e-12);
    EXPECT_EQ(summarize({}).count, 0u);
}

TEST(Aggregate, OrderIndependentAndCountsEveryRun) {
    std::vector<RunMetrics> runs{fake_run(ModelId::M4, 3, {0.5, 0.95}), fake_run(ModelId::M4, 1, {0.95, 0.97}),
                                 fake_run(ModelId::M1, 2, {0.5, 0.6}), fake_run(ModelId::M4, 2, {0.85, 0.92})};
    RunMetrics diverged = fake_run(ModelId::M1, 1, {0.4});
    diverged.diverged = true;
    runs.push_back(diverged);

    const ExperimentReport a = aggregate(runs);
    std::reverse(runs.begin(), runs.end());
    const ExperimentReport b = aggregate(runs);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());

    ASSERT_EQ(a.models.size(), 2u);
    const ModelSummary& m1 = a.models[0];
    EXPECT_EQ(m1.model, ModelId::M1);
    EXPECT_EQ(m1.runs, 2u);
    EXPECT_EQ(m1.diverged, 1u);
    EXPECT_EQ(m1.completed, 1u);
    EXPECT_EQ(m1.thresholds[1].reached, 0u);
    EXPECT_FALSE(m1.thresholds[1].median_all);

    const ModelSummary& m4 = a.models[1];
    EXPECT_EQ(m4.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
    EXPECT_EQ(m4.thresholds[1].reached, 3u);
    EXPECT_DOUBLE_EQ(m4.thresholds[1].epochs.mean, 5.0 / 3.0);
    EXPECT_EQ(m4.thresholds[1].median_all, 2.0);
}

TEST(Aggregate, MedianCountsMissesAsInfinite) {
    const ExperimentReport r = aggregate({fake_run(ModelId::M1, 1, {0.95}), fake_run(ModelId::M1, 2, {0.5}),
                                          fake_run(ModelId::M1, 3, {0.5})});
    EXPECT_EQ(r.models[0].thresholds[1].reached, 1u);
    EXPECT_EQ(r.models[0].thresholds[1].epochs.median, 1.0);
    EXPECT_FALSE(r.models[0].thresholds[1].median_all);
}

TEST(RunJson, RoundTrip) {
    RunMetrics m = fake_run(ModelId::M5, 7, {0.2, 0.85, 0.95});
    m.failure = std::nullopt;
    const RunMetrics back = run_metrics_from_json(to_json(m));
    EXPECT_EQ(to_json(back).dump(), to_json(m).dump());
}

TEST(Config, ParseOverridesAndRender) {
    const TrainConfig cfg = parse_config("# comment\nmodels = M1, M4\n epochs=30\nsynth.spectral_noise=0.5\n"
                                         "seeds=3,4,5\nthresholds=0.7,0.9\n\n");
    EXPECT_EQ(cfg.models, (std::vector<ModelId>{ModelId::M1, ModelId::M4}));
    EXPECT_EQ(cfg.epochs, 30u);
    EXPECT_EQ(cfg.synth.spectral_noise, 0.5);
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 4, 5}));
    EXPECT_EQ(cfg.thresholds, (std::vector<double>{0.7, 0.9}));
    EXPECT_EQ(render_config(parse_config(render_config(cfg))), render_config(cfg));

    TrainConfig all = parse_config("models=all\nnum_seeds=4\n");
    EXPECT_EQ(all.models.size(), 5u);
    EXPECT_EQ(all.seeds, (std::vector<std::uint64_t>{1, 2, 3, 4}));
}

TEST(Config, Defaults) {
    const TrainConfig cfg;
    EXPECT_EQ(cfg.lr, 1e-3);
    EXPECT_EQ(cfg.batch_size, 64u);
    EXPECT_EQ(cfg.epochs, 100u);
    EXPECT_EQ(cfg.train_fraction, 0.8);
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(parse_config("nonsense_key=1"), ConfigError);
    EXPECT_THROW(parse_config("epochs"), ConfigError);
    EXPECT_THROW(parse_config("epochs=abc"), ConfigError);
    EXPECT_THROW(parse_config("models=M9"), ConfigError);
    EXPECT_THROW(validate(parse_config("thresholds=0.9,0.8")), ConfigError);
    EXPECT_THROW(validate(parse_config("lr=0")), ConfigError);
    EXPECT_THROW(validate(parse_config("train_fraction=1")), ConfigError);
    EXPECT_THROW(validate(parse_config("epochs=0")), ConfigError);
}

TEST(Train, TenSampleSmokeRun) {
    const TrainConfig cfg = tiny_config();
    const RunMetrics m = train(cfg, 1);
    EXPECT_EQ(m.test_accuracy.size(), 1u);
    EXPECT_EQ(m.train_loss.size(), 1u);
    EXPECT_FALSE(m.diverged);
    EXPECT_GT(m.param_count, 0u);
    EXPECT_EQ(m.epochs_to_threshold.size(), 2u);
}

TEST(Train, IdenticalConfigAndSeedGiveIdenticalHistories) {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 3;
    const PreparedData data = prepare_data(cfg);
    const RunMetrics a = train(cfg, data, ModelId::M4, 5);
    const RunMetrics b = train(cfg, data, ModelId::M4, 5);
    EXPECT_EQ(a.train_loss, b.train_loss);
    EXPECT_EQ(a.test_accuracy, b.test_accuracy);
    EXPECT_EQ(a.train_accuracy, b.train_accuracy);
}

TEST(Train, IncompatibleInputIsReported) {
    TrainConfig cfg = tiny_config();
    cfg.synth.height = 6;
    EXPECT_THROW(train(cfg, 1), ShapeError);
}

TEST(Experiment, ReportIsReproducibleFromRunFiles) {
    TrainConfig cfg = tiny_config();
    cfg.models = {ModelId::M1, ModelId::M4};
    cfg.seeds = {1, 2, 3};
    cfg.out_dir = scratch("experiment").string();
    const ExperimentOutcome outcome = multi_seed(cfg);
    EXPECT_EQ(outcome.runs.size(), 6u);
    ASSERT_EQ(outcome.report.models.size(), 2u);
    EXPECT_EQ(outcome.report.models[1].seeds, (std::vector<std::uint64_t>{1, 2, 3}));

    const std::filesystem::path out = cfg.out_dir;
    const std::string json = slurp(out / "report.json"), csv = slurp(out / "summary.csv"),
                      table = slurp(out / "table.md");
    const auto regen = scratch("regen");
    regenerate_report(out / "runs", regen);
    EXPECT_EQ(slurp(regen / "report.json"), json);
    EXPECT_EQ(slurp(regen / "summary.csv"), csv);
    EXPECT_EQ(slurp(regen / "table.md"), table);
    EXPECT_NE(table.find("Model 4 (Shallow Quantum Inspired)"), std::string::npos);
    std::filesystem::remove_all(out);
    std::filesystem::remove_all(regen);
}

TEST(Experiment, ParallelScheduleGivesSameReport) {
    TrainConfig cfg = tiny_config();
    cfg.seeds = {1, 2, 3};
    cfg.out_dir = scratch("serial").string();
    multi_seed(cfg);
    TrainConfig par = cfg;
    par.jobs = 3;
    par.out_dir = scratch("parallel").string();
    multi_seed(par);
    // Wall-clock seconds differ between schedules; everything else must not.
    EXPECT_EQ(slurp(std::filesystem::path(cfg.out_dir) / "table.md"),
              slurp(std::filesystem::path(par.out_dir) / "table.md"));
    const auto serial = load_runs(std::filesystem::path(cfg.out_dir) / "runs");
    const auto parallel = load_runs(std::filesystem::path(par.out_dir) / "runs");
    ASSERT_EQ(serial.size(), parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        EXPECT_EQ(serial[i].seed, parallel[i].seed);
        EXPECT_EQ(serial[i].train_loss, parallel[i].train_loss);
        EXPECT_EQ(serial[i].test_accuracy, parallel[i].test_accuracy);
    }
    std::filesystem::remove_all(cfg.out_dir);
    std::filesystem::remove_all(par.out_dir);
}

TEST(Experiment, FailedSeedIsRecordedNotFatal) {
    TrainConfig cfg = tiny_config();
    cfg.models = {ModelId::M4};
    cfg.synth.num_classes = 1;
    cfg.synth.samples_per_class = 10;
    cfg.out_dir = scratch("failed").string();
    const ExperimentOutcome outcome = multi_seed(cfg);
    ASSERT_EQ(outcome.report.models.size(), 1u);
    EXPECT_EQ(outcome.report.models[0].failed, 2u);
    EXPECT_TRUE(outcome.runs[0].failure);
    std::filesystem::remove_all(cfg.out_dir);
}

TEST(Experiment, NeedsTwoSeeds) {
    TrainConfig cfg = tiny_config();
    cfg.seeds = {1};
    EXPECT_THROW(multi_seed(cfg), ConfigError);
}
