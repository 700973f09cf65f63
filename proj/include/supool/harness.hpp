#pragma once

#include "supool/data.hpp"
#include "supool/zoo.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace supool {

// ---------------------------------------------------------------------------
// Configuration

/// Training/experiment configuration. Read from a key=value file; any key can
/// be overridden from the command line.
///
/// Keys: models, d, data, synth.classes, synth.samples_per_class,
/// synth.channels, synth.height, synth.width, synth.spectral_noise,
/// synth.spatial_noise, synth.seed, epochs, batch_size, lr, seeds, num_seeds,
/// thresholds, train_fraction, split_seed, out_dir, jobs.
struct TrainConfig {
    std::vector<ModelId> models{ModelId::M4};
    int d = 3;
    std::string data_path; // MSTF file; empty selects the synthetic generator
    SynthConfig synth{};
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    std::vector<double> thresholds{0.80, 0.90};
    double train_fraction = 0.8;
    std::uint64_t split_seed = 0;
    std::string out_dir = "runs";
    std::size_t jobs = 1;
};

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

void validate(const TrainConfig& cfg);
void apply_setting(TrainConfig& cfg, std::string_view key, std::string_view value);
/// Parses key=value lines ('#' starts a comment) on top of `base`.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
/// Canonical key=value rendering; parse_config(render_config(c)) == c.
std::string render_config(const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Training

struct PreparedData {
    Dataset train;
    Dataset test;
    std::vector<double> channel_mean;
    std::vector<double> channel_std;
    std::size_t num_classes = 0;
    std::string source; // file path or synthetic description
};

/// Load (or synthesise), split and standardise.
PreparedData prepare_data(const TrainConfig& cfg);

struct RunMetrics {
    ModelId model = ModelId::M4;
    int d = 3;
    std::uint64_t seed = 0;
    std::size_t param_count = 0;
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    double lr = 0.0;
    std::string data_source;
    std::vector<double> thresholds;

    std::vector<double> train_loss;
    std::vector<double> train_accuracy;
    std::vector<double> test_accuracy;
    std::vector<double> epoch_seconds;

    bool diverged = false;
    std::optional<std::string> failure; // set when the run threw

    // Derived by finalize().
    double max_test_accuracy = 0.0;
    std::vector<std::optional<int>> epochs_to_threshold;
    std::optional<int> peak_epoch;
};

/// 1-based index of the first epoch with accuracy >= threshold.
std::optional<int> epochs_to_threshold(std::span<const double> history, double threshold);

/// Fills max accuracy, epochs-to-threshold and peak epoch from the histories.
void finalize(RunMetrics& m);

nlohmann::json to_json(const RunMetrics& m);
RunMetrics run_metrics_from_json(const nlohmann::json& j);

using EpochCallback = std::function<void(const RunMetrics&)>;

/// One seeded training run. Deterministic given (cfg, data, model, seed).
RunMetrics train(const TrainConfig& cfg, const PreparedData& data, ModelId model, std::uint64_t seed,
                 const EpochCallback& on_epoch = {});
/// Convenience overload: prepares the data and trains cfg.models.front().
RunMetrics train(const TrainConfig& cfg, std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Fraction of correct argmax predictions.
double evaluate_accuracy(Network& net, const Dataset& ds, std::size_t batch_size);

// ---------------------------------------------------------------------------
// Aggregation

struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double stddev = 0.0; // sample standard deviation, 0 for fewer than two values
};

Summary summarize(std::vector<double> values);

struct ThresholdSummary {
    double threshold = 0.0;
    std::size_t reached = 0;
    std::size_t not_reached = 0;
    Summary epochs;                       // over runs that reached the threshold
    std::optional<double> median_all;     // never-reached runs counted as +inf; nullopt if the median is +inf
};

struct ModelSummary {
    ModelId model = ModelId::M4;
    int d = 3;
    std::size_t param_count = 0;
    std::size_t epochs = 0;
    std::size_t batch_size = 0;
    double lr = 0.0;
    std::vector<std::uint64_t> seeds;
    std::size_t runs = 0;
    std::size_t completed = 0;
    std::size_t diverged = 0;
    std::size_t failed = 0;
    Summary max_test_accuracy;
    std::vector<ThresholdSummary> thresholds;
    Summary peak_epoch;
    Summary epoch_seconds;
};

struct ExperimentReport {
    std::vector<double> thresholds;
    std::vector<ModelSummary> models;
};

/// Pure function of the run records; order of `runs` does not matter.
ExperimentReport aggregate(std::vector<RunMetrics> runs);

nlohmann::json to_json(const ExperimentReport& r);
std::string report_csv(const ExperimentReport& r);
/// Markdown table with the columns of the published results table.
std::string report_table(const ExperimentReport& r);

std::filesystem::path run_file_name(ModelId model, int d, std::uint64_t seed);
void write_run(const std::filesystem::path& dir, const RunMetrics& m);
std::vector<RunMetrics> load_runs(const std::filesystem::path& dir);
/// Writes report.json, summary.csv and table.md into `dir`.
void write_report(const std::filesystem::path& dir, const ExperimentReport& r);

struct ExperimentOutcome {
    std::vector<RunMetrics> runs;
    ExperimentReport report;
};

using RunCallback = std::function<void(const RunMetrics&)>;

/// Every (model, seed) pair of the config. Run records go to out_dir/runs,
/// the report is re-aggregated from those files into out_dir.
ExperimentOutcome multi_seed(const TrainConfig& cfg, const RunCallback& on_run = {},
                             const EpochCallback& on_epoch = {});

/// Re-aggregates out_dir/runs (or `runs_dir`) and rewrites the report.
ExperimentReport regenerate_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out_dir);

} // namespace supool
