#include "supool/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace supool {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto end = s.find(',', start);
        const auto item = trim(s.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        if (!item.empty()) out.push_back(item);
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    text = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ConfigError("config: cannot parse '" + std::string(text) + "' for key '" + std::string(key) + "'");
    }
    return value;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string format_fixed(double v, int digits) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

std::string with_thousands(std::size_t v) {
    std::string digits = std::to_string(v);
    std::string out;
    for (std::size_t i = 0; i < digits.size(); ++i) {
        if (i > 0 && (digits.size() - i) % 3 == 0) out += ',';
        out += digits[i];
    }
    return out;
}

std::string threshold_label(double t) { return format_double(std::round(t * 10000.0) / 100.0) + "%"; }

std::string synth_description(const SynthConfig& s) {
    return "synthetic(classes=" + std::to_string(s.num_classes) + ", per_class=" + std::to_string(s.samples_per_class) +
           ", shape=" + std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width) +
           ", spectral_noise=" + format_double(s.spectral_noise) + ", spatial_noise=" + format_double(s.spatial_noise) +
           ", seed=" + std::to_string(s.seed) + ")";
}

Tensor4 gather_batch(const Dataset& ds, std::span<const std::size_t> indices, std::vector<int>& labels) {
    const Shape4& s = ds.images.shape();
    Tensor4 batch(indices.size(), s.c, s.h, s.w);
    labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = ds.images.sample(indices[i]);
        std::copy(src.begin(), src.end(), batch.sample(i).begin());
        labels[i] = ds.labels[indices[i]];
    }
    return batch;
}

std::size_t count_correct(const Tensor4& logits, std::span<const int> labels) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto row = logits.sample(i);
        const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
        if (best == labels[i]) ++correct;
    }
    return correct;
}

nlohmann::json summary_json(const Summary& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"median", s.median}, {"std", s.stddev}};
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

} // namespace

// ---------------------------------------------------------------------------
// Configuration

void validate(const TrainConfig& cfg) {
    if (cfg.models.empty()) throw ConfigError("config: no models selected");
    if (cfg.d < 2 || cfg.d > 16) throw ConfigError("config: d must lie in [2, 16]");
    if (cfg.epochs < 1) throw ConfigError("config: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("config: lr must be positive");
    if (cfg.seeds.empty()) throw ConfigError("config: no seeds");
    if (cfg.jobs < 1) throw ConfigError("config: jobs must be >= 1");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
        throw ConfigError("config: train_fraction must lie in (0, 1)");
    }
    for (std::size_t i = 0; i < cfg.thresholds.size(); ++i) {
        const double t = cfg.thresholds[i];
        if (!(t > 0.0 && t < 1.0)) throw ConfigError("config: thresholds must lie in (0, 1)");
        if (i > 0 && !(t > cfg.thresholds[i - 1])) throw ConfigError("config: thresholds must be ascending");
    }
    if (cfg.data_path.empty()) {
        try {
            validate(cfg.synth);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
}

void apply_setting(TrainConfig& cfg, std::string_view key, std::string_view value) {
    key = trim(key);
    value = trim(value);
    if (key == "models" || key == "model") {
        cfg.models.clear();
        if (value == "all") {
            cfg.models.assign(std::begin(kAllModels), std::end(kAllModels));
        } else {
            for (auto item : split_list(value)) {
                try {
                    cfg.models.push_back(parse_model_id(item));
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            }
        }
    } else if (key == "d") {
        cfg.d = parse_number<int>(key, value);
    } else if (key == "data") {
        cfg.data_path = std::string(value);
    } else if (key == "synth.classes") {
        cfg.synth.num_classes = parse_number<std::size_t>(key, value);
    } else if (key == "synth.samples_per_class") {
        cfg.synth.samples_per_class = parse_number<std::size_t>(key, value);
    } else if (key == "synth.channels") {
        cfg.synth.channels = parse_number<std::size_t>(key, value);
    } else if (key == "synth.height") {
        cfg.synth.height = parse_number<std::size_t>(key, value);
    } else if (key == "synth.width") {
        cfg.synth.width = parse_number<std::size_t>(key, value);
    } else if (key == "synth.spectral_noise") {
        cfg.synth.spectral_noise = parse_number<double>(key, value);
    } else if (key == "synth.spatial_noise") {
        cfg.synth.spatial_noise = parse_number<double>(key, value);
    } else if (key == "synth.seed") {
        cfg.synth.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "epochs") {
        cfg.epochs = parse_number<std::size_t>(key, value);
    } else if (key == "batch_size") {
        cfg.batch_size = parse_number<std::size_t>(key, value);
    } else if (key == "lr") {
        cfg.lr = parse_number<double>(key, value);
    } else if (key == "seeds") {
        cfg.seeds.clear();
        for (auto item : split_list(value)) cfg.seeds.push_back(parse_number<std::uint64_t>(key, item));
    } else if (key == "num_seeds") {
        const auto n = parse_number<std::uint64_t>(key, value);
        cfg.seeds.clear();
        for (std::uint64_t s = 1; s <= n; ++s) cfg.seeds.push_back(s);
    } else if (key == "thresholds") {
        cfg.thresholds.clear();
        for (auto item : split_list(value)) cfg.thresholds.push_back(parse_number<double>(key, item));
    } else if (key == "train_fraction") {
        cfg.train_fraction = parse_number<double>(key, value);
    } else if (key == "split_seed") {
        cfg.split_seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "out_dir") {
        cfg.out_dir = std::string(value);
    } else if (key == "jobs") {
        cfg.jobs = parse_number<std::size_t>(key, value);
    } else {
        throw ConfigError("config: unknown key '" + std::string(key) + "'");
    }
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (!line.empty()) {
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
            }
            apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::string render_config(const TrainConfig& cfg) {
    auto join = [](const auto& items, auto fmt) {
        std::string out;
        for (const auto& item : items) {
            if (!out.empty()) out += ',';
            out += fmt(item);
        }
        return out;
    };
    std::ostringstream os;
    os << "models=" << join(cfg.models, [](ModelId m) { return to_string(m); }) << '\n'
       << "d=" << cfg.d << '\n'
       << "data=" << cfg.data_path << '\n'
       << "synth.classes=" << cfg.synth.num_classes << '\n'
       << "synth.samples_per_class=" << cfg.synth.samples_per_class << '\n'
       << "synth.channels=" << cfg.synth.channels << '\n'
       << "synth.height=" << cfg.synth.height << '\n'
       << "synth.width=" << cfg.synth.width << '\n'
       << "synth.spectral_noise=" << format_double(cfg.synth.spectral_noise) << '\n'
       << "synth.spatial_noise=" << format_double(cfg.synth.spatial_noise) << '\n'
       << "synth.seed=" << cfg.synth.seed << '\n'
       << "epochs=" << cfg.epochs << '\n'
       << "batch_size=" << cfg.batch_size << '\n'
       << "lr=" << format_double(cfg.lr) << '\n'
       << "seeds=" << join(cfg.seeds, [](std::uint64_t s) { return std::to_string(s); }) << '\n'
       << "thresholds=" << join(cfg.thresholds, [](double t) { return format_double(t); }) << '\n'
       << "train_fraction=" << format_double(cfg.train_fraction) << '\n'
       << "split_seed=" << cfg.split_seed << '\n'
       << "out_dir=" << cfg.out_dir << '\n'
       << "jobs=" << cfg.jobs << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Training

PreparedData prepare_data(const TrainConfig& cfg) {
    validate(cfg);
    Dataset full = cfg.data_path.empty() ? synth_dataset(cfg.synth) : read_tensor_file(cfg.data_path);
    if (full.size() == 0) throw std::invalid_argument("dataset is empty");
    DatasetSplit split = split_dataset(full, cfg.train_fraction, cfg.split_seed);
    Standardized standardized = standardize(split.train, split.test);

    PreparedData data;
    data.num_classes = full.num_classes();
    data.train = std::move(standardized.train);
    data.test = std::move(standardized.test);
    data.channel_mean = std::move(standardized.mean);
    data.channel_std = std::move(standardized.stddev);
    data.source = cfg.data_path.empty() ? synth_description(cfg.synth) : cfg.data_path;
    return data;
}

std::optional<int> epochs_to_threshold(std::span<const double> history, double threshold) {
    if (history.empty()) throw std::invalid_argument("epochs_to_threshold: empty history");
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("epochs_to_threshold: threshold outside (0, 1)");
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (history[i] >= threshold) return static_cast<int>(i + 1);
    }
    return std::nullopt;
}

void finalize(RunMetrics& m) {
    m.epochs_to_threshold.clear();
    m.peak_epoch.reset();
    m.max_test_accuracy = 0.0;
    if (m.test_accuracy.empty()) {
        m.epochs_to_threshold.assign(m.thresholds.size(), std::nullopt);
        return;
    }
    const auto best = std::max_element(m.test_accuracy.begin(), m.test_accuracy.end());
    m.max_test_accuracy = *best;
    m.peak_epoch = static_cast<int>(best - m.test_accuracy.begin()) + 1;
    for (double t : m.thresholds) m.epochs_to_threshold.push_back(epochs_to_threshold(m.test_accuracy, t));
}

nlohmann::json to_json(const RunMetrics& m) {
    nlohmann::json thresholds = nlohmann::json::array();
    for (std::size_t i = 0; i < m.thresholds.size(); ++i) {
        const auto& hit = i < m.epochs_to_threshold.size() ? m.epochs_to_threshold[i] : std::nullopt;
        thresholds.push_back({{"threshold", m.thresholds[i]}, {"epoch", hit ? nlohmann::json(*hit) : nlohmann::json()}});
    }
    return {
        {"model", to_string(m.model)},
        {"d", m.d},
        {"seed", m.seed},
        {"param_count", m.param_count},
        {"epochs", m.epochs},
        {"batch_size", m.batch_size},
        {"lr", m.lr},
        {"data", m.data_source},
        {"train_loss", m.train_loss},
        {"train_accuracy", m.train_accuracy},
        {"test_accuracy", m.test_accuracy},
        {"epoch_seconds", m.epoch_seconds},
        {"diverged", m.diverged},
        {"failure", m.failure ? nlohmann::json(*m.failure) : nlohmann::json()},
        {"max_test_accuracy", m.max_test_accuracy},
        {"epochs_to_threshold", thresholds},
        {"peak_epoch", m.peak_epoch ? nlohmann::json(*m.peak_epoch) : nlohmann::json()},
    };
}

RunMetrics run_metrics_from_json(const nlohmann::json& j) {
    RunMetrics m;
    m.model = parse_model_id(j.at("model").get<std::string>());
    m.d = j.at("d").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.param_count = j.at("param_count").get<std::size_t>();
    m.epochs = j.at("epochs").get<std::size_t>();
    m.batch_size = j.at("batch_size").get<std::size_t>();
    m.lr = j.at("lr").get<double>();
    m.data_source = j.at("data").get<std::string>();
    m.train_loss = j.at("train_loss").get<std::vector<double>>();
    m.train_accuracy = j.at("train_accuracy").get<std::vector<double>>();
    m.test_accuracy = j.at("test_accuracy").get<std::vector<double>>();
    m.epoch_seconds = j.at("epoch_seconds").get<std::vector<double>>();
    m.diverged = j.at("diverged").get<bool>();
    if (!j.at("failure").is_null()) m.failure = j.at("failure").get<std::string>();
    for (const auto& t : j.at("epochs_to_threshold")) m.thresholds.push_back(t.at("threshold").get<double>());
    finalize(m);
    return m;
}

double evaluate_accuracy(Network& net, const Dataset& ds, std::size_t batch_size) {
    if (ds.size() == 0) return 0.0;
    std::vector<std::size_t> indices(ds.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    std::vector<int> labels;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t count = std::min(batch_size, indices.size() - start);
        const Tensor4 batch = gather_batch(ds, std::span(indices).subspan(start, count), labels);
        correct += count_correct(net.forward(batch), labels);
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

RunMetrics train(const TrainConfig& cfg, const PreparedData& data, ModelId model, std::uint64_t seed,
                 const EpochCallback& on_epoch) {
    validate(cfg);
    if (data.train.size() == 0) throw std::invalid_argument("train: empty training set");

    RunMetrics metrics;
    metrics.model = model;
    metrics.d = cfg.d;
    metrics.seed = seed;
    metrics.epochs = cfg.epochs;
    metrics.batch_size = cfg.batch_size;
    metrics.lr = cfg.lr;
    metrics.data_source = data.source;
    metrics.thresholds = cfg.thresholds;

    const ModelSpec spec{model, cfg.d, data.train.sample_shape(), data.num_classes};
    Network net = build_model(spec, seed);
    metrics.param_count = count_params(net);
    Adam optimizer(net, AdamConfig{cfg.lr});

    std::seed_seq shuffle_seed{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5f1eu};
    std::mt19937_64 rng(shuffle_seed);
    std::vector<std::size_t> order(data.train.size());
    std::vector<int> labels;

    for (std::size_t epoch = 0; epoch < cfg.epochs && !metrics.diverged; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t count = std::min(cfg.batch_size, order.size() - start);
            const Tensor4 batch = gather_batch(data.train, std::span(order).subspan(start, count), labels);
            net.zero_grad();
            const Tensor4 logits = net.forward(batch);
            const LossResult<float> loss = softmax_cross_entropy<float>(logits, labels);
            if (!std::isfinite(loss.loss)) {
                metrics.diverged = true;
                break;
            }
            net.backward(loss.d_logits);
            optimizer.step();
            loss_sum += loss.loss * static_cast<double>(count);
            correct += count_correct(logits, labels);
        }
        if (metrics.diverged) break;

        const auto n = static_cast<double>(order.size());
        metrics.train_loss.push_back(loss_sum / n);
        metrics.train_accuracy.push_back(static_cast<double>(correct) / n);
        metrics.test_accuracy.push_back(evaluate_accuracy(net, data.test, cfg.batch_size));
        metrics.epoch_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
        finalize(metrics);
        if (on_epoch) on_epoch(metrics);
    }
    finalize(metrics);
    return metrics;
}

RunMetrics train(const TrainConfig& cfg, std::uint64_t seed, const EpochCallback& on_epoch) {
    const PreparedData data = prepare_data(cfg);
    return train(cfg, data, cfg.models.front(), seed, on_epoch);
}

// ---------------------------------------------------------------------------
// Aggregation

Summary summarize(std::vector<double> values) {
    Summary s;
    s.count = values.size();
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    s.median = values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
    if (values.size() > 1) {
        double sq = 0.0;
        for (double v : values) sq += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    return s;
}

ExperimentReport aggregate(std::vector<RunMetrics> runs) {
    std::sort(runs.begin(), runs.end(), [](const RunMetrics& a, const RunMetrics& b) {
        if (a.model != b.model) return a.model < b.model;
        if (a.d != b.d) return a.d < b.d;
        return a.seed < b.seed;
    });

    ExperimentReport report;
    if (!runs.empty()) report.thresholds = runs.front().thresholds;
    for (const auto& r : runs) {
        if (r.thresholds != report.thresholds) throw ConfigError("aggregate: runs use different thresholds");
    }

    std::map<std::pair<ModelId, int>, std::vector<const RunMetrics*>> groups;
    for (const auto& r : runs) groups[{r.model, r.d}].push_back(&r);

    for (const auto& [key, members] : groups) {
        ModelSummary ms;
        ms.model = key.first;
        ms.d = key.second;
        ms.runs = members.size();
        std::vector<double> max_acc, peaks, seconds;
        std::vector<std::vector<double>> reached(report.thresholds.size());
        std::vector<std::vector<double>> all(report.thresholds.size());
        for (const RunMetrics* r : members) {
            ms.seeds.push_back(r->seed);
            if (r->param_count != 0) ms.param_count = r->param_count;
            if (ms.epochs == 0) {
                ms.epochs = r->epochs;
                ms.batch_size = r->batch_size;
                ms.lr = r->lr;
            }
            if (r->failure) {
                ++ms.failed;
                continue;
            }
            if (r->diverged) {
                ++ms.diverged;
                continue;
            }
            ++ms.completed;
            max_acc.push_back(r->max_test_accuracy);
            if (r->peak_epoch) peaks.push_back(*r->peak_epoch);
            if (!r->epoch_seconds.empty()) {
                double total = 0.0;
                for (double s : r->epoch_seconds) total += s;
                seconds.push_back(total / static_cast<double>(r->epoch_seconds.size()));
            }
            for (std::size_t t = 0; t < report.thresholds.size(); ++t) {
                const auto& hit = r->epochs_to_threshold[t];
                if (hit) reached[t].push_back(*hit);
                all[t].push_back(hit ? static_cast<double>(*hit) : std::numeric_limits<double>::infinity());
            }
        }
        ms.max_test_accuracy = summarize(max_acc);
        ms.peak_epoch = summarize(peaks);
        ms.epoch_seconds = summarize(seconds);
        for (std::size_t t = 0; t < report.thresholds.size(); ++t) {
            ThresholdSummary ts;
            ts.threshold = report.thresholds[t];
            ts.reached = reached[t].size();
            ts.not_reached = all[t].size() - reached[t].size();
            ts.epochs = summarize(reached[t]);
            if (!all[t].empty()) {
                std::sort(all[t].begin(), all[t].end());
                const std::size_t mid = all[t].size() / 2;
                const double med = all[t].size() % 2 == 1 ? all[t][mid] : 0.5 * (all[t][mid - 1] + all[t][mid]);
                if (std::isfinite(med)) ts.median_all = med;
            }
            ms.thresholds.push_back(ts);
        }
        report.models.push_back(std::move(ms));
    }
    return report;
}

nlohmann::json to_json(const ExperimentReport& r) {
    nlohmann::json models = nlohmann::json::array();
    for (const auto& m : r.models) {
        nlohmann::json thresholds = nlohmann::json::array();
        for (const auto& t : m.thresholds) {
            thresholds.push_back({{"threshold", t.threshold},
                                  {"reached", t.reached},
                                  {"not_reached", t.not_reached},
                                  {"epochs", summary_json(t.epochs)},
                                  {"median_all", optional_json(t.median_all)}});
        }
        models.push_back({{"model", to_string(m.model)},
                          {"title", model_title(m.model)},
                          {"d", m.d},
                          {"param_count", m.param_count},
                          {"epochs", m.epochs},
                          {"batch_size", m.batch_size},
                          {"lr", m.lr},
                          {"seeds", m.seeds},
                          {"runs", m.runs},
                          {"completed", m.completed},
                          {"diverged", m.diverged},
                          {"failed", m.failed},
                          {"max_test_accuracy", summary_json(m.max_test_accuracy)},
                          {"epochs_to_threshold", thresholds},
                          {"peak_epoch", summary_json(m.peak_epoch)},
                          {"epoch_seconds", summary_json(m.epoch_seconds)}});
    }
    return {{"thresholds", r.thresholds}, {"models", models}};
}

std::string report_csv(const ExperimentReport& r) {
    std::ostringstream os;
    os << "model,d,params,runs,completed,diverged,failed,max_acc_mean,max_acc_median,max_acc_std";
    for (double t : r.thresholds) {
        const std::string p = "ep" + format_double(std::round(t * 10000.0) / 100.0);
        os << ',' << p << "_reached," << p << "_mean," << p << "_median," << p << "_std," << p << "_median_all";
    }
    os << ",peak_mean,peak_median,peak_std,epoch_seconds_mean\n";
    for (const auto& m : r.models) {
        os << to_string(m.model) << ',' << m.d << ',' << m.param_count << ',' << m.runs << ',' << m.completed << ','
           << m.diverged << ',' << m.failed << ',' << format_double(m.max_test_accuracy.mean) << ','
           << format_double(m.max_test_accuracy.median) << ',' << format_double(m.max_test_accuracy.stddev);
        for (const auto& t : m.thresholds) {
            os << ',' << t.reached << ',';
            if (t.reached > 0) {
                os << format_double(t.epochs.mean) << ',' << format_double(t.epochs.median) << ','
                   << format_double(t.epochs.stddev);
            } else {
                os << ",,";
            }
            os << ',' << (t.median_all ? format_double(*t.median_all) : std::string("inf"));
        }
        os << ',' << format_double(m.peak_epoch.mean) << ',' << format_double(m.peak_epoch.median) << ','
           << format_double(m.peak_epoch.stddev) << ',' << format_double(m.epoch_seconds.mean) << '\n';
    }
    return os.str();
}

std::string report_table(const ExperimentReport& r) {
    std::ostringstream os;
    os << "| Model | d | # Params | Max Test Acc (%) |";
    for (double t : r.thresholds) os << ' ' << threshold_label(t) << " |";
    os << " Peak Epoch | Runs |\n|---|---|---:|---:|";
    for (std::size_t i = 0; i < r.thresholds.size(); ++i) os << "---:|";
    os << "---:|---:|\n";
    for (const auto& m : r.models) {
        os << "| " << model_title(m.model) << " | " << m.d << " | " << with_thousands(m.param_count) << " | ";
        if (m.completed > 0) {
            os << format_fixed(100.0 * m.max_test_accuracy.mean, 2) << " ± "
               << format_fixed(100.0 * m.max_test_accuracy.stddev, 2);
        } else {
            os << "n/a";
        }
        os << " |";
        for (const auto& t : m.thresholds) {
            os << ' ';
            if (t.reached == 0) {
                os << "never";
            } else {
                os << format_fixed(t.epochs.mean, 2);
                if (t.not_reached > 0) os << " (" << t.reached << '/' << (t.reached + t.not_reached) << ')';
            }
            os << " |";
        }
        os << ' ' << (m.completed > 0 ? format_fixed(m.peak_epoch.mean, 2) : std::string("n/a")) << " | "
           << m.completed << '/' << m.runs << " |\n";
    }
    return os.str();
}

std::filesystem::path run_file_name(ModelId model, int d, std::uint64_t seed) {
    return to_string(model) + "_d" + std::to_string(d) + "_seed" + std::to_string(seed) + ".json";
}

void write_run(const std::filesystem::path& dir, const RunMetrics& m) {
    std::filesystem::create_directories(dir);
    const auto path = dir / run_file_name(m.model, m.d, m.seed);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_json(m).dump(2) << '\n';
}

namespace {

RunMetrics load_run(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    try {
        return run_metrics_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed run file " + path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

} // namespace

std::vector<RunMetrics> load_runs(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw std::runtime_error("no run directory at " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<RunMetrics> runs;
    for (const auto& f : files) runs.push_back(load_run(f));
    return runs;
}

void write_report(const std::filesystem::path& dir, const ExperimentReport& r) {
    std::filesystem::create_directories(dir);
    write_text(dir / "report.json", to_json(r).dump(2) + "\n");
    write_text(dir / "summary.csv", report_csv(r));
    write_text(dir / "table.md", report_table(r));
}

ExperimentOutcome multi_seed(const TrainConfig& cfg, const RunCallback& on_run, const EpochCallback& on_epoch) {
    validate(cfg);
    if (cfg.seeds.size() < 2) throw ConfigError("experiment: at least two seeds are required");
    const PreparedData data = prepare_data(cfg);
    const std::filesystem::path out_dir = cfg.out_dir;
    const std::filesystem::path runs_dir = out_dir / "runs";
    std::filesystem::create_directories(runs_dir);

    struct Job {
        ModelId model;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (ModelId model : cfg.models) {
        for (std::uint64_t seed : cfg.seeds) jobs.push_back({model, seed});
    }

    auto run_one = [&](const Job& job) {
        RunMetrics m;
        try {
            m = train(cfg, data, job.model, job.seed, cfg.jobs == 1 ? on_epoch : EpochCallback{});
        } catch (const std::exception& e) {
            m = RunMetrics{};
            m.model = job.model;
            m.d = cfg.d;
            m.seed = job.seed;
            m.epochs = cfg.epochs;
            m.batch_size = cfg.batch_size;
            m.lr = cfg.lr;
            m.data_source = data.source;
            m.thresholds = cfg.thresholds;
            m.failure = e.what();
            finalize(m);
        }
        write_run(runs_dir, m);
        return m;
    };

    ExperimentOutcome outcome;
    outcome.runs.resize(jobs.size());
    for (std::size_t start = 0; start < jobs.size(); start += cfg.jobs) {
        const std::size_t end = std::min(jobs.size(), start + cfg.jobs);
        std::vector<std::future<RunMetrics>> pending;
        for (std::size_t i = start; i < end; ++i) {
            pending.push_back(std::async(cfg.jobs == 1 ? std::launch::deferred : std::launch::async, run_one, jobs[i]));
        }
        for (std::size_t i = start; i < end; ++i) {
            outcome.runs[i] = pending[i - start].get();
            if (on_run) on_run(outcome.runs[i]);
        }
    }

    // Aggregate from the stored files so that `report` reproduces this output exactly.
    std::vector<RunMetrics> stored;
    for (const auto& job : jobs) stored.push_back(load_run(runs_dir / run_file_name(job.model, cfg.d, job.seed)));
    outcome.report = aggregate(std::move(stored));
    write_report(out_dir, outcome.report);
    return outcome;
}

ExperimentReport regenerate_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out_dir) {
    ExperimentReport report = aggregate(load_runs(runs_dir));
    write_report(out_dir, report);
    return report;
}

} // namespace supool
