#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emh/eval.hpp"
#include "emh/market_data.hpp"
#include "emh/net.hpp"

namespace emh {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kReportSchemaVersion = 1;

enum class ScalerFit { full_sample, train_only };

struct ExperimentConfig {
    std::vector<FeatureSetSpec> feature_sets = canonical_feature_sets();
    int iterations = 50;
    std::uint64_t base_seed = 42;
    net::TrainConfig train;
    std::filesystem::path fixtures_dir = "fixtures";
    std::filesystem::path output_dir = "out";
    ScalerFit scaler_fit = ScalerFit::full_sample;
    // redraw the synthetic noise feature each iteration (default) or fix
    // one draw across iterations
    bool rnorm_per_iteration = true;
    int sanity_iterations = 10;
    int workers = 0; // 0 = hardware concurrency
    bool continue_on_error = false;
    bool emit_csv = true;
    bool emit_json = true;
    bool emit_history = false;

    // content-determining keys only (delivery knobs such as workers and
    // output paths are excluded so reports stay byte-identical)
    std::string effective_text() const;
    static ExperimentConfig from_text(const std::string& text);
    static ExperimentConfig from_file(const std::filesystem::path& path);
};

struct RunMetadata {
    std::size_t aligned_rows = 0;
    std::size_t dataset_rows = 0;
    std::size_t train_rows = 0;
    std::size_t validation_rows = 0;
    std::size_t test_rows = 0;
    double train_block_positive_fraction = 0.0;
    double train_positive_fraction = 0.0;
    double validation_positive_fraction = 0.0;
    double test_positive_fraction = 0.0;
    double buy_and_hold_cumulative = 0.0;
    double buy_and_hold_accuracy = 0.0;
    bool incomplete = false;
};

struct AggregateReport {
    std::vector<AggregateRow> rows;
    std::vector<std::vector<IterationResult>> iteration_results; // per row
    RunMetadata metadata;
    std::string config_text;
    std::string version = kVersion;
};

// One complete seeded cycle: build -> normalize -> split -> init -> train
// -> predict -> metrics. All randomness comes from `seed`.
IterationResult run_iteration(const FeatureSetSpec& spec,
                              const AlignedTable& table, std::uint64_t seed,
                              const ExperimentConfig& config,
                              const std::vector<int>& lags = {1},
                              net::TrainHistory* history_out = nullptr);

AlignedTable load_fixture_table(const std::filesystem::path& fixtures_dir,
                                const std::vector<std::string>& symbols);

AggregateReport run_experiment(const ExperimentConfig& config);

// Same-day (unlagged) ETH returns against the BTC signal; the model-works
// gate.
AggregateReport run_sanity_eth(const ExperimentConfig& config);

enum class ReportFormat { csv, json };

void emit_report(const AggregateReport& report, ReportFormat format,
                 const std::filesystem::path& path);

AggregateReport parse_report_json(const std::filesystem::path& path);

void emit_history_csv(const std::vector<std::pair<int, net::TrainHistory>>& h,
                      const std::filesystem::path& path);

// Subcommands: fetch, stats, run, sanity-eth, gradcheck.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int cli_main(int argc, const char* const* argv);

} // namespace emh
