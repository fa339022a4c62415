#include "emh/runner.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "emh/errors.hpp"
#include "emh/rng.hpp"

namespace emh {

namespace {

const std::vector<std::string> kFixtureSymbols = {"btc",    "spx", "rut",
                                                  "eurusd", "tnx", "xau"};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    throw ConfigError("config key '" + key + "': expected bool, got '" + v +
                      "'");
}

} // namespace

std::string ExperimentConfig::effective_text() const {
    std::ostringstream out;
    out << "base_seed = " << base_seed << "\n";
    out << "batch_size = " << train.batch_size << "\n";
    out << "epochs = " << train.epochs << "\n";
    std::string ids;
    for (const auto& fs : feature_sets)
        ids += (ids.empty() ? "" : ",") + std::to_string(fs.id);
    out << "feature_sets = " << ids << "\n";
    out << "fixtures_dir = " << fixtures_dir.string() << "\n";
    out << "iterations = " << iterations << "\n";
    out << "learning_rate = " << fmt_double(train.learning_rate) << "\n";
    out << "rnorm_per_iteration = " << (rnorm_per_iteration ? "true" : "false")
        << "\n";
    out << "sanity_iterations = " << sanity_iterations << "\n";
    out << "scaler_fit = "
        << (scaler_fit == ScalerFit::full_sample ? "full" : "train") << "\n";
    out << "shuffle = " << (train.shuffle_each_epoch ? "true" : "false")
        << "\n";
    return out.str();
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#')
            continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(line_no) +
                             ": expected 'key = value'");
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        try {
            if (key == "iterations") {
                cfg.iterations = std::stoi(val);
            } else if (key == "base_seed") {
                cfg.base_seed = std::stoull(val);
            } else if (key == "epochs") {
                cfg.train.epochs = std::stoi(val);
            } else if (key == "batch_size") {
                cfg.train.batch_size = std::stoul(val);
            } else if (key == "learning_rate") {
                cfg.train.learning_rate = std::stod(val);
            } else if (key == "shuffle") {
                cfg.train.shuffle_each_epoch = parse_bool(val, key);
            } else if (key == "feature_sets") {
                const auto all = canonical_feature_sets();
                cfg.feature_sets.clear();
                std::istringstream ids(val);
                std::string tok;
                while (std::getline(ids, tok, ',')) {
                    const int id = std::stoi(trim(tok));
                    if (id < 0 || id >= static_cast<int>(all.size()))
                        throw ConfigError("unknown feature set id " +
                                          std::to_string(id));
                    cfg.feature_sets.push_back(all[static_cast<std::size_t>(id)]);
                }
                if (cfg.feature_sets.empty())
                    throw ConfigError("feature_sets is empty");
            } else if (key == "fixtures_dir") {
                cfg.fixtures_dir = val;
            } else if (key == "output_dir") {
                cfg.output_dir = val;
            } else if (key == "scaler_fit") {
                if (val == "full")
                    cfg.scaler_fit = ScalerFit::full_sample;
                else if (val == "train")
                    cfg.scaler_fit = ScalerFit::train_only;
                else
                    throw ConfigError("scaler_fit must be 'full' or 'train'");
            } else if (key == "rnorm_per_iteration") {
                cfg.rnorm_per_iteration = parse_bool(val, key);
            } else if (key == "sanity_iterations") {
                cfg.sanity_iterations = std::stoi(val);
            } else if (key == "workers") {
                cfg.workers = std::stoi(val);
            } else if (key == "continue_on_error") {
                cfg.continue_on_error = parse_bool(val, key);
            } else {
                throw ConfigError("unknown config key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw ParseError("config key '" + key + "': bad value '" + val +
                             "'");
        } catch (const std::out_of_range&) {
            throw ParseError("config key '" + key + "': value out of range");
        }
    }
    if (cfg.iterations < 1)
        throw ConfigError("iterations must be >= 1");
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw StorageError("cannot open config '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

AlignedTable load_fixture_table(const std::filesystem::path& fixtures_dir,
                                const std::vector<std::string>& symbols) {
    std::vector<PriceSeries> series;
    for (const auto& sym : symbols) {
        const auto path = fixtures_dir / (sym + ".csv");
        if (!std::filesystem::exists(path))
            throw ConfigError("missing fixture '" + path.string() + "'");
        series.push_back(load_csv(path, sym));
    }
    return align_by_date(series);
}

IterationResult run_iteration(const FeatureSetSpec& spec,
                              const AlignedTable& table, std::uint64_t seed,
                              const ExperimentConfig& config,
                              const std::vector<int>& lags,
                              net::TrainHistory* history_out) {
    const std::uint64_t rnorm_seed =
        config.rnorm_per_iteration ? derive_seed(seed, 1, 0)
                                   : derive_seed(config.base_seed, 1, 0);
    const std::uint64_t init_seed = derive_seed(seed, 2, 0);
    const std::uint64_t shuffle_seed = derive_seed(seed, 3, 0);

    Dataset raw = build_feature_matrix(spec, table, rnorm_seed, lags);
    const std::size_t fit_end =
        config.scaler_fit == ScalerFit::full_sample
            ? raw.rows()
            : static_cast<std::size_t>(static_cast<double>(raw.rows()) * 0.6);
    auto [scaled, scaler] = minmax_normalize(raw, 0, fit_end);
    SplitResult parts = split(scaled);

    net::NetworkParams params =
        net::init_network(scaled.features.cols(), init_seed);
    net::TrainConfig tc = config.train;
    tc.seed = shuffle_seed;
    net::TrainHistory history =
        net::train(params, parts.train, parts.validation, tc);
    if (history_out)
        *history_out = std::move(history);

    IterationResult r;
    r.feature_set_id = spec.id;
    r.seed = seed;

    const auto p_train = net::predict_proba(params, parts.train.features);
    const auto p_test = net::predict_proba(params, parts.test.features);
    r.final_in_sample_loss = net::bce_loss(p_train, parts.train.target);
    r.final_out_of_sample_loss = net::bce_loss(p_test, parts.test.target);

    const auto sig_train = net::predict_signal(p_train);
    const auto sig_test = net::predict_signal(p_test);
    std::size_t hit = 0;
    for (std::size_t i = 0; i < sig_train.size(); ++i)
        hit += sig_train[i] == parts.train.target[i];
    r.in_sample_accuracy =
        static_cast<double>(hit) / static_cast<double>(sig_train.size());

    r.signals.observations.reserve(sig_test.size());
    for (std::size_t i = 0; i < sig_test.size(); ++i)
        r.signals.observations.push_back({parts.test.dates[i], sig_test[i]});

    r.out_of_sample_accuracy = accuracy(r.signals, parts.test.target_series());
    const ReturnSeries test_returns = parts.test.target_return_series();
    r.cumulative_log_return = cumulative_log_return(r.signals, test_returns);
    r.strategy_daily_sd = strategy_daily_sd(r.signals, test_returns);
    r.sharpe = sharpe_ratio(r.signals, test_returns);
    const auto counts = signal_counts(r.signals);
    r.positive_count = counts.first;
    r.negative_count = counts.second;
    return r;
}

namespace {

RunMetadata collect_metadata(const FeatureSetSpec& probe_spec,
                             const AlignedTable& table,
                             const ExperimentConfig& config,
                             const std::vector<int>& lags) {
    Dataset ds = build_feature_matrix(probe_spec, table,
                                      derive_seed(config.base_seed, 9, 9),
                                      lags);
    SplitResult parts = split(ds);

    auto pos_frac = [](const Dataset& d) {
        int pos = 0;
        for (int t : d.target)
            pos += t;
        return static_cast<double>(pos) / static_cast<double>(d.rows());
    };

    RunMetadata md;
    md.aligned_rows = table.dates.size();
    md.dataset_rows = ds.rows();
    md.train_rows = parts.train.rows();
    md.validation_rows = parts.validation.rows();
    md.test_rows = parts.test.rows();
    md.train_positive_fraction = pos_frac(parts.train);
    md.validation_positive_fraction = pos_frac(parts.validation);
    md.test_positive_fraction = pos_frac(parts.test);
    const double block =
        static_cast<double>(parts.train.rows() + parts.validation.rows());
    md.train_block_positive_fraction =
        (md.train_positive_fraction * static_cast<double>(parts.train.rows()) +
         md.validation_positive_fraction *
             static_cast<double>(parts.validation.rows())) /
        block;
    const auto bh = buy_and_hold_baseline(parts.test.target_return_series(),
                                          parts.test.target_series());
    md.buy_and_hold_cumulative = bh.first;
    md.buy_and_hold_accuracy = bh.second;
    return md;
}

AggregateRow aggregate(const FeatureSetSpec& spec,
                       const std::vector<IterationResult>& results) {
    AggregateRow row;
    row.feature_set_id = spec.id;
    row.name = spec.name;
    row.iterations = static_cast<int>(results.size());
    if (results.empty())
        return row;
    const double n = static_cast<double>(results.size());
    double sum_sd = 0.0;
    std::vector<double> acc_out;
    acc_out.reserve(results.size());
    for (const auto& r : results) {
        row.mean_in_sample_accuracy += r.in_sample_accuracy / n;
        row.mean_out_of_sample_accuracy += r.out_of_sample_accuracy / n;
        row.mean_in_sample_loss += r.final_in_sample_loss / n;
        row.mean_out_of_sample_loss += r.final_out_of_sample_loss / n;
        row.mean_cumulative_log_return += r.cumulative_log_return / n;
        row.mean_sharpe += r.sharpe / n;
        row.mean_positive_count += static_cast<double>(r.positive_count) / n;
        row.mean_negative_count += static_cast<double>(r.negative_count) / n;
        sum_sd += r.strategy_daily_sd / n;
        acc_out.push_back(r.out_of_sample_accuracy);
    }
    // paper-shaped aggregate: mean cumulative return over mean daily sd
    row.sharpe_aggregate =
        sum_sd > 0.0
            ? row.mean_cumulative_log_return / sum_sd * std::sqrt(252.0)
            : 0.0;
    if (results.size() >= 2) {
        const MeanCi ci = mean_ci(acc_out);
        row.acc_out_ci_lo = ci.lo;
        row.acc_out_ci_hi = ci.hi;
        row.ci_defined = true;
    }
    return row;
}

struct Job {
    std::size_t row;
    int iteration;
};

AggregateReport run_jobs(const std::vector<FeatureSetSpec>& sets,
                         const AlignedTable& table,
                         const ExperimentConfig& config, int iterations,
                         const std::vector<int>& lags,
                         std::vector<std::pair<int, net::TrainHistory>>*
                             first_histories) {
    std::vector<Job> jobs;
    for (std::size_t r = 0; r < sets.size(); ++r)
        for (int it = 0; it < iterations; ++it)
            jobs.push_back({r, it});

    std::vector<std::vector<std::optional<IterationResult>>> results(
        sets.size());
    for (auto& v : results)
        v.resize(static_cast<std::size_t>(iterations));
    std::vector<net::TrainHistory> histories(sets.size());

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    std::atomic<bool> abort{false};

    auto worker = [&] {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size() || abort.load())
                return;
            const Job job = jobs[j];
            const FeatureSetSpec& spec = sets[job.row];
            const std::uint64_t seed =
                derive_seed(config.base_seed,
                            static_cast<std::uint64_t>(spec.id),
                            static_cast<std::uint64_t>(job.iteration));
            try {
                net::TrainHistory* hist =
                    (first_histories && job.iteration == 0)
                        ? &histories[job.row]
                        : nullptr;
                results[job.row][static_cast<std::size_t>(job.iteration)] =
                    run_iteration(spec, table, seed, config, lags, hist);
            } catch (const std::exception& e) {
                if (config.continue_on_error)
                    continue;
                std::scoped_lock lk(err_mutex);
                if (!first_error)
                    first_error = std::make_exception_ptr(
                        Error("feature set " + std::to_string(spec.id) +
                              ", seed " + std::to_string(seed) + ": " +
                              e.what()));
                abort.store(true);
                return;
            }
        }
    };

    int n_workers = config.workers > 0
                        ? config.workers
                        : static_cast<int>(std::thread::hardware_concurrency());
    n_workers = std::max(1, n_workers);
    n_workers = std::min<int>(n_workers, static_cast<int>(jobs.size()));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);

    AggregateReport report;
    bool incomplete = false;
    for (std::size_t r = 0; r < sets.size(); ++r) {
        std::vector<IterationResult> done;
        for (auto& slot : results[r])
            if (slot)
                done.push_back(std::move(*slot));
        if (static_cast<int>(done.size()) != iterations)
            incomplete = true;
        report.rows.push_back(aggregate(sets[r], done));
        report.iteration_results.push_back(std::move(done));
        if (first_histories)
            first_histories->push_back({sets[r].id, std::move(histories[r])});
    }
    report.metadata.incomplete = incomplete;
    return report;
}

} // namespace

AggregateReport run_experiment(const ExperimentConfig& config) {
    if (config.feature_sets.empty())
        throw ConfigError("no feature sets configured");
    if (config.iterations < 1)
        throw ConfigError("iterations must be >= 1");

    // the full six-asset table defines the row skeleton for every set
    const AlignedTable table =
        load_fixture_table(config.fixtures_dir, kFixtureSymbols);

    std::vector<std::pair<int, net::TrainHistory>> histories;
    AggregateReport report = run_jobs(
        config.feature_sets, table, config, config.iterations, {1},
        config.emit_history ? &histories : nullptr);
    const bool incomplete = report.metadata.incomplete;
    report.metadata =
        collect_metadata(config.feature_sets.front(), table, config, {1});
    report.metadata.incomplete = incomplete;
    report.config_text = config.effective_text();
    if (config.emit_history && config.emit_json) {
        std::filesystem::create_directories(config.output_dir);
        emit_history_csv(histories, config.output_dir / "history.csv");
    }
    return report;
}

AggregateReport run_sanity_eth(const ExperimentConfig& config) {
    const AlignedTable table =
        load_fixture_table(config.fixtures_dir, {"btc", "eth"});
    FeatureSetSpec spec;
    spec.id = 7;
    spec.name = "eth_same_day";
    spec.feature_symbols = {"eth"};

    AggregateReport report = run_jobs({spec}, table, config,
                                      config.sanity_iterations, {0}, nullptr);
    const bool incomplete = report.metadata.incomplete;
    report.metadata = collect_metadata(spec, table, config, {0});
    report.metadata.incomplete = incomplete;
    report.config_text = config.effective_text();
    return report;
}

void emit_history_csv(const std::vector<std::pair<int, net::TrainHistory>>& h,
                      const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw StorageError("cannot write '" + path.string() + "'");
    out << "feature_set_id,epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    char buf[256];
    for (const auto& [id, hist] : h) {
        for (std::size_t e = 0; e < hist.epochs.size(); ++e) {
            const auto& s = hist.epochs[e];
            std::snprintf(buf, sizeof buf, "%d,%zu,%.12g,%.12g,%.12g,%.12g\n",
                          id, e + 1, s.train_loss, s.train_accuracy,
                          s.val_loss, s.val_accuracy);
            out << buf;
        }
    }
}

} // namespace emh
