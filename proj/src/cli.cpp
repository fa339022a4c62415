#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "emh/errors.hpp"
#include "emh/runner.hpp"

namespace emh {

namespace {

struct CommonOpts {
    std::string config_path;
    int iterations = 0;
    std::uint64_t seed = 0;
    std::string fixtures;
    std::string out_dir;
    std::string scaler_fit;
    std::string formats;
    std::string feature_sets;
    int epochs = 0;
    int workers = 0;
    bool emit_history = false;
    bool continue_on_error = false;

    CLI::Option* o_iterations = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_fixtures = nullptr;
    CLI::Option* o_out = nullptr;
    CLI::Option* o_scaler = nullptr;
    CLI::Option* o_formats = nullptr;
    CLI::Option* o_sets = nullptr;
    CLI::Option* o_epochs = nullptr;
    CLI::Option* o_workers = nullptr;
    CLI::Option* o_history = nullptr;
    CLI::Option* o_continue = nullptr;
};

void add_common(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--config", o.config_path, "config file (key = value)");
    o.o_iterations =
        sub->add_option("--iterations", o.iterations, "iterations per set");
    o.o_seed = sub->add_option("--seed", o.seed, "base seed");
    o.o_fixtures =
        sub->add_option("--fixtures", o.fixtures, "fixture CSV directory");
    o.o_out = sub->add_option("--out", o.out_dir, "output directory");
    o.o_scaler = sub->add_option("--scaler-fit", o.scaler_fit,
                                 "min-max fit domain: full|train");
    o.o_formats =
        sub->add_option("--formats", o.formats, "report formats: csv,json");
    o.o_sets = sub->add_option("--feature-sets", o.feature_sets,
                               "comma-separated feature set ids (0-6)");
    o.o_epochs = sub->add_option("--epochs", o.epochs, "training epochs");
    o.o_workers = sub->add_option("--workers", o.workers, "worker threads");
    o.o_history = sub->add_flag("--emit-history", o.emit_history,
                                "write per-epoch history CSV");
    o.o_continue = sub->add_flag("--continue-on-error", o.continue_on_error,
                                 "collect partial results on failures");
}

ExperimentConfig build_config(const CommonOpts& o) {
    ExperimentConfig cfg = o.config_path.empty()
                               ? ExperimentConfig{}
                               : ExperimentConfig::from_file(o.config_path);
    if (o.o_iterations->count())
        cfg.iterations = o.iterations;
    if (o.o_seed->count())
        cfg.base_seed = o.seed;
    if (o.o_fixtures->count())
        cfg.fixtures_dir = o.fixtures;
    if (o.o_out->count())
        cfg.output_dir = o.out_dir;
    if (o.o_scaler->count()) {
        if (o.scaler_fit == "full")
            cfg.scaler_fit = ScalerFit::full_sample;
        else if (o.scaler_fit == "train")
            cfg.scaler_fit = ScalerFit::train_only;
        else
            throw ConfigError("--scaler-fit must be 'full' or 'train'");
    }
    if (o.o_formats->count()) {
        cfg.emit_csv = o.formats.find("csv") != std::string::npos;
        cfg.emit_json = o.formats.find("json") != std::string::npos;
        if (!cfg.emit_csv && !cfg.emit_json)
            throw ConfigError("--formats needs csv and/or json");
    }
    if (o.o_sets->count()) {
        const auto all = canonical_feature_sets();
        cfg.feature_sets.clear();
        std::istringstream ids(o.feature_sets);
        std::string tok;
        while (std::getline(ids, tok, ',')) {
            const int id = std::stoi(tok);
            if (id < 0 || id >= static_cast<int>(all.size()))
                throw ConfigError("unknown feature set id " + tok);
            cfg.feature_sets.push_back(all[static_cast<std::size_t>(id)]);
        }
        if (cfg.feature_sets.empty())
            throw ConfigError("--feature-sets is empty");
    }
    if (o.o_epochs->count())
        cfg.train.epochs = o.epochs;
    if (o.o_workers->count())
        cfg.workers = o.workers;
    if (o.o_history->count())
        cfg.emit_history = true;
    if (o.o_continue->count())
        cfg.continue_on_error = true;
    return cfg;
}

void print_report(const AggregateReport& report) {
    std::printf("%-4s %-34s %8s %8s %8s %8s %9s %8s %7s %7s\n", "set", "name",
                "acc_in", "acc_out", "loss_in", "loss_out", "cumsum", "sharpe",
                "pos", "neg");
    for (const auto& r : report.rows)
        std::printf("%-4d %-34s %8.4f %8.4f %8.4f %8.4f %9.4f %8.4f %7.1f "
                    "%7.1f\n",
                    r.feature_set_id, r.name.c_str(),
                    r.mean_in_sample_accuracy, r.mean_out_of_sample_accuracy,
                    r.mean_in_sample_loss, r.mean_out_of_sample_loss,
                    r.mean_cumulative_log_return, r.mean_sharpe,
                    r.mean_positive_count, r.mean_negative_count);
    const auto& md = report.metadata;
    std::printf("rows: aligned %zu, dataset %zu, split %zu/%zu/%zu | "
                "buy&hold cum %.4f acc %.4f | train block pos %.4f\n",
                md.aligned_rows, md.dataset_rows, md.train_rows,
                md.validation_rows, md.test_rows, md.buy_and_hold_cumulative,
                md.buy_and_hold_accuracy, md.train_block_positive_fraction);
    if (md.incomplete)
        std::printf("WARNING: report is incomplete (failed iterations were "
                    "skipped)\n");
}

void write_reports(const AggregateReport& report, const ExperimentConfig& cfg,
                   const std::string& stem) {
    std::filesystem::create_directories(cfg.output_dir);
    if (cfg.emit_csv)
        emit_report(report, ReportFormat::csv,
                    cfg.output_dir / (stem + ".csv"));
    if (cfg.emit_json)
        emit_report(report, ReportFormat::json,
                    cfg.output_dir / (stem + ".json"));
}

int cmd_run(const CommonOpts& opts) {
    const ExperimentConfig cfg = build_config(opts);
    const AggregateReport report = run_experiment(cfg);
    print_report(report);
    write_reports(report, cfg, "report");
    return 0;
}

int cmd_sanity(const CommonOpts& opts) {
    ExperimentConfig cfg = build_config(opts);
    if (opts.o_iterations->count())
        cfg.sanity_iterations = opts.iterations;
    const AggregateReport report = run_sanity_eth(cfg);
    print_report(report);
    write_reports(report, cfg, "sanity_report");
    std::printf("mean out-of-sample accuracy: %.4f over %d iterations\n",
                report.rows.front().mean_out_of_sample_accuracy,
                report.rows.front().iterations);
    return 0;
}

int cmd_stats(const std::string& fixtures, const std::string& out_dir) {
    const std::vector<std::string> symbols = {"btc",    "spx", "rut",
                                              "eurusd", "tnx", "xau"};
    std::map<std::string, ReturnSeries> returns;
    for (const auto& sym : symbols) {
        const auto series =
            load_csv(std::filesystem::path(fixtures) / (sym + ".csv"), sym);
        returns.emplace(sym, log_returns(series));
    }

    std::printf("%-8s %10s %10s %10s %10s %10s\n", "asset", "mean", "min",
                "max", "skew", "kurtosis");
    std::string stats_csv =
        "asset,mean,min,max,skewness,excess_kurtosis\n";
    for (const auto& sym : symbols) {
        const SummaryStats st = summary_stats(returns.at(sym));
        std::printf("%-8s %10.4f %10.3f %10.3f %10.3f %10.3f\n", sym.c_str(),
                    st.mean, st.min, st.max, st.skewness, st.excess_kurtosis);
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                      sym.c_str(), st.mean, st.min, st.max, st.skewness,
                      st.excess_kurtosis);
        stats_csv += buf;
    }

    const CorrMatrix corr = pearson_corr_matrix(returns);
    std::printf("\nPearson correlation (intersected dates):\n%-8s", "");
    for (const auto& s : corr.symbols)
        std::printf("%9s", s.c_str());
    std::printf("\n");
    std::string corr_csv = "asset";
    for (const auto& s : corr.symbols)
        corr_csv += "," + s;
    corr_csv += "\n";
    for (std::size_t i = 0; i < corr.symbols.size(); ++i) {
        std::printf("%-8s", corr.symbols[i].c_str());
        corr_csv += corr.symbols[i];
        for (std::size_t j = 0; j < corr.symbols.size(); ++j) {
            std::printf("%9.3f", corr.values(i, j));
            char buf[64];
            std::snprintf(buf, sizeof buf, ",%.12g", corr.values(i, j));
            corr_csv += buf;
        }
        std::printf("\n");
        corr_csv += "\n";
    }

    const AcfResult a = acf(returns.at("btc").values(), 10);
    std::printf("\nBTC autocorrelation (95%% band +-%.4f):\n",
                a.ci_half_width);
    std::string acf_csv = "lag,acf,ci_half_width\n";
    for (std::size_t k = 0; k < a.coefficients.size(); ++k) {
        const bool outside = std::abs(a.coefficients[k]) > a.ci_half_width;
        std::printf("  lag %2zu: %+0.4f%s\n", k + 1, a.coefficients[k],
                    outside ? "  *" : "");
        char buf[96];
        std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g\n", k + 1,
                      a.coefficients[k], a.ci_half_width);
        acf_csv += buf;
    }

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        for (const auto& [name, text] :
             {std::pair<std::string, std::string*>{"stats.csv", &stats_csv},
              {"corr.csv", &corr_csv},
              {"acf.csv", &acf_csv}}) {
            std::ofstream f(std::filesystem::path(out_dir) / name,
                            std::ios::trunc);
            if (!f)
                throw StorageError("cannot write stats output");
            f << *text;
        }
    }
    return 0;
}

int cmd_gradcheck(int instances, std::uint64_t seed) {
    const net::GradCheckReport rep = net::gradcheck(instances, seed);
    std::printf("gradcheck: %d instances, %ld partials, %ld failed, worst "
                "rel err %.3e\n",
                rep.instances, rep.checked, rep.failed, rep.worst_rel);
    return rep.passed() ? 0 : 1;
}

int cmd_fetch(const std::vector<std::string>& symbols,
              const std::string& start, const std::string& end,
              std::string cache_dir, const std::string& host, int port,
              const std::string& base_path) {
    if (cache_dir.empty()) {
        if (const char* env = std::getenv("EMH_CACHE_DIR"))
            cache_dir = env;
        else
            cache_dir = "cache";
    }
    HttpCsvSource source(host, port, base_path);
    for (const auto& sym : symbols) {
        const PriceSeries s =
            cache_get_or_fetch(source, sym, Date::parse(start),
                               Date::parse(end), cache_dir);
        std::printf("%s: %zu rows cached under %s\n", sym.c_str(), s.size(),
                    cache_dir.c_str());
    }
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"neural-network market-efficiency experiments on daily "
                 "crypto and macro data"};
    app.require_subcommand(0, 1);

    CommonOpts run_opts;
    CLI::App* run = app.add_subcommand("run", "full multi-seed experiment");
    add_common(run, run_opts);

    CommonOpts sanity_opts;
    CLI::App* sanity = app.add_subcommand(
        "sanity-eth", "same-day ETH feature sanity experiment");
    add_common(sanity, sanity_opts);

    std::string stats_fixtures = "fixtures", stats_out;
    CLI::App* stats = app.add_subcommand(
        "stats", "descriptive return statistics, correlations, ACF");
    stats->add_option("--fixtures", stats_fixtures, "fixture CSV directory");
    stats->add_option("--out", stats_out, "also write CSVs here");

    int gc_instances = 24;
    std::uint64_t gc_seed = 4242;
    CLI::App* gradcheck_cmd = app.add_subcommand(
        "gradcheck", "finite-difference check of the analytic gradients");
    gradcheck_cmd->add_option("--instances", gc_instances,
                              "random instances to check");
    gradcheck_cmd->add_option("--seed", gc_seed, "rng seed");

    std::vector<std::string> fetch_symbols;
    std::string fetch_start = "2014-09-17", fetch_end = "2022-05-01";
    std::string fetch_cache, fetch_host = "127.0.0.1", fetch_base;
    int fetch_port = 80;
    CLI::App* fetch =
        app.add_subcommand("fetch", "populate the price cache from a "
                                    "daily-bar HTTP source");
    fetch->add_option("--symbol", fetch_symbols, "symbols to fetch")
        ->required();
    fetch->add_option("--start", fetch_start, "range start (inclusive)");
    fetch->add_option("--end", fetch_end, "range end (exclusive)");
    fetch->add_option("--cache-dir", fetch_cache,
                      "cache directory (default $EMH_CACHE_DIR or ./cache)");
    fetch->add_option("--source-host", fetch_host, "source host");
    fetch->add_option("--source-port", fetch_port, "source port");
    fetch->add_option("--source-base", fetch_base, "source base path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed())
            return cmd_run(run_opts);
        if (sanity->parsed())
            return cmd_sanity(sanity_opts);
        if (stats->parsed())
            return cmd_stats(stats_fixtures, stats_out);
        if (gradcheck_cmd->parsed())
            return cmd_gradcheck(gc_instances, gc_seed);
        if (fetch->parsed())
            return cmd_fetch(fetch_symbols, fetch_start, fetch_end,
                             fetch_cache, fetch_host, fetch_port, fetch_base);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    std::cout << app.help();
    return 2;
}

} // namespace emh
