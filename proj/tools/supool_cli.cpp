// supool: data generation, training, experiments, verification and reporting.

#include "supool/harness.hpp"
#include "supool/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace supool;

namespace {

struct ConfigArgs {
    std::string config_path;
    std::vector<std::string> overrides;

    void attach(CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
        cmd->add_option("-s,--set", overrides, "override a key, e.g. --set epochs=30");
    }

    TrainConfig resolve() const {
        TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config(config_path);
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
            apply_setting(cfg, std::string_view(o).substr(0, eq), std::string_view(o).substr(eq + 1));
        }
        validate(cfg);
        return cfg;
    }
};

void print_epoch(const RunMetrics& m) {
    const std::size_t e = m.test_accuracy.size();
    std::printf("%s seed=%llu epoch %3zu/%zu  loss %.4f  train %.4f  test %.4f  (%.2fs)\n", to_string(m.model).c_str(),
                static_cast<unsigned long long>(m.seed), e, m.epochs, m.train_loss.back(), m.train_accuracy.back(),
                m.test_accuracy.back(), m.epoch_seconds.back());
    std::fflush(stdout);
}

void print_run(const RunMetrics& m) {
    std::printf("%s seed=%llu  ", to_string(m.model).c_str(), static_cast<unsigned long long>(m.seed));
    if (m.failure) {
        std::printf("FAILED: %s\n", m.failure->c_str());
    } else if (m.diverged) {
        std::printf("diverged after %zu epochs\n", m.test_accuracy.size());
    } else {
        std::printf("max test %.4f", m.max_test_accuracy);
        for (std::size_t i = 0; i < m.thresholds.size(); ++i) {
            const auto& hit = m.epochs_to_threshold[i];
            std::printf("  %g: %s", m.thresholds[i], hit ? std::to_string(*hit).c_str() : "never");
        }
        std::printf("\n");
    }
    std::fflush(stdout);
}

std::vector<int> parse_dims(const std::string& text) {
    std::vector<int> dims;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find(',', start);
        if (end == std::string::npos) end = text.size();
        const std::string item = text.substr(start, end - start);
        const auto dash = item.find('-');
        if (dash != std::string::npos) {
            const int lo = std::stoi(item.substr(0, dash)), hi = std::stoi(item.substr(dash + 1));
            for (int d = lo; d <= hi; ++d) dims.push_back(d);
        } else if (!item.empty()) {
            dims.push_back(std::stoi(item));
        }
        start = end + 1;
    }
    return dims;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SU(d) unitary pooling: training engine and property checks"};
    app.require_subcommand(1);

    ConfigArgs gen_args, train_args, exp_args;

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as an MSTF file");
    gen_args.attach(gen);
    std::string gen_out;
    gen->add_option("-o,--out", gen_out, "output file")->required();

    auto* train_cmd = app.add_subcommand("train", "single training run");
    train_args.attach(train_cmd);
    std::string train_model = "M4";
    std::uint64_t train_seed = 1;
    std::string train_out;
    bool quiet = false;
    train_cmd->add_option("-m,--model", train_model, "M1..M5");
    train_cmd->add_option("--seed", train_seed, "run seed");
    train_cmd->add_option("-o,--out", train_out, "run JSON path (default: <out_dir>/runs/<run>.json)");
    train_cmd->add_flag("-q,--quiet", quiet, "no per-epoch output");

    auto* exp_cmd = app.add_subcommand("experiment", "every configured model over every seed");
    exp_args.attach(exp_cmd);
    bool exp_verbose = false;
    exp_cmd->add_flag("-v,--verbose", exp_verbose, "per-epoch output (jobs=1 only)");

    auto* verify_cmd = app.add_subcommand("verify", "run the geometric and gradient property suite");
    std::uint64_t verify_seed = 0;
    std::string verify_dims = "2-6";
    std::size_t verify_trials = 200;
    std::string verify_json;
    verify_cmd->add_option("--seed", verify_seed, "suite seed");
    verify_cmd->add_option("--dims", verify_dims, "dimensions, e.g. 2-6 or 2,3,5");
    verify_cmd->add_option("--trials", verify_trials, "random trials per property");
    verify_cmd->add_option("--json", verify_json, "also write results as JSON");

    auto* report_cmd = app.add_subcommand("report", "re-aggregate stored run files");
    std::string report_runs, report_out;
    report_cmd->add_option("--runs", report_runs, "directory of run JSON files")->required();
    report_cmd->add_option("-o,--out", report_out, "output directory (default: parent of --runs)");

    auto* params_cmd = app.add_subcommand("params", "parameter counts of the five architectures");
    int params_d = 3;
    std::size_t params_c = 13, params_hw = 64, params_classes = 10;
    params_cmd->add_option("-d", params_d, "SU(d)");
    params_cmd->add_option("--channels", params_c, "input channels");
    params_cmd->add_option("--size", params_hw, "input height and width");
    params_cmd->add_option("--classes", params_classes, "number of classes");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const TrainConfig cfg = gen_args.resolve();
            const SynthClasses classes = synth_classes(cfg.synth);
            const Dataset ds = synth_dataset(cfg.synth);
            write_tensor_file(gen_out, ds);
            std::printf("wrote %zu samples (%zu classes, %zux%zux%zu) to %s; %zu signature redraws\n", ds.size(),
                        ds.num_classes(), cfg.synth.channels, cfg.synth.height, cfg.synth.width, gen_out.c_str(),
                        classes.redraws);
        } else if (*train_cmd) {
            TrainConfig cfg = train_args.resolve();
            cfg.models = {parse_model_id(train_model)};
            const RunMetrics m = train(cfg, train_seed, quiet ? EpochCallback{} : EpochCallback{print_epoch});
            print_run(m);
            const std::filesystem::path out =
                train_out.empty() ? std::filesystem::path(cfg.out_dir) / "runs" / run_file_name(m.model, m.d, m.seed)
                                  : std::filesystem::path(train_out);
            if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
            std::ofstream file(out);
            if (!(file << to_json(m).dump(2) << '\n')) throw std::runtime_error("cannot write " + out.string());
            std::printf("run written to %s\n", out.string().c_str());
            if (m.failure || m.diverged) return 1;
        } else if (*exp_cmd) {
            const TrainConfig cfg = exp_args.resolve();
            std::printf("%s", render_config(cfg).c_str());
            const ExperimentOutcome outcome =
                multi_seed(cfg, print_run, exp_verbose ? EpochCallback{print_epoch} : EpochCallback{});
            std::printf("\n%s\nreport written to %s\n", report_table(outcome.report).c_str(), cfg.out_dir.c_str());
            for (const auto& m : outcome.report.models) {
                if (m.failed > 0) return 1;
            }
        } else if (*verify_cmd) {
            const SuiteResult result = run_suite(verify_seed, parse_dims(verify_dims), verify_trials);
            std::printf("%s", format_text(result).c_str());
            if (!verify_json.empty()) {
                std::ofstream out(verify_json);
                if (!out) throw std::runtime_error("cannot write " + verify_json);
                out << to_json(result).dump(2) << '\n';
            }
            return result.passed() ? 0 : 1;
        } else if (*report_cmd) {
            const std::filesystem::path runs = report_runs;
            const std::filesystem::path out = report_out.empty() ? runs.parent_path() : std::filesystem::path(report_out);
            const ExperimentReport report = regenerate_report(runs, out.empty() ? "." : out);
            std::printf("%s", report_table(report).c_str());
        } else if (*params_cmd) {
            std::printf("%-6s %12s %12s\n", "model", "count", "published");
            for (ModelId id : kAllModels) {
                const ModelSpec spec{id, params_d, {params_c, params_hw, params_hw}, params_classes};
                std::printf("%-6s %12zu %12zu\n", to_string(id).c_str(), count_params(spec), published_param_count(id));
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
