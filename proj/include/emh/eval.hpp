#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "emh/features.hpp"

namespace emh {

// One seeded train/evaluate cycle's metrics.
struct IterationResult {
    int feature_set_id = 0;
    std::uint64_t seed = 0;
    double in_sample_accuracy = 0.0;
    double out_of_sample_accuracy = 0.0;
    double final_in_sample_loss = 0.0;
    double final_out_of_sample_loss = 0.0;
    SignalSeries signals; // predicted test-window signals
    double cumulative_log_return = 0.0;
    double sharpe = 0.0;
    double strategy_daily_sd = 0.0; // population sd of daily strategy returns
    int positive_count = 0;
    int negative_count = 0;
};

// Per-feature-set averages over N iterations.
struct AggregateRow {
    int feature_set_id = 0;
    std::string name;
    int iterations = 0;
    double mean_in_sample_accuracy = 0.0;
    double mean_out_of_sample_accuracy = 0.0;
    double acc_out_ci_lo = 0.0;
    double acc_out_ci_hi = 0.0;
    bool ci_defined = false;
    double mean_in_sample_loss = 0.0;
    double mean_out_of_sample_loss = 0.0;
    double mean_cumulative_log_return = 0.0;
    double mean_sharpe = 0.0;         // mean of per-iteration Sharpe ratios
    double sharpe_aggregate = 0.0;    // mean cum return / mean daily sd * sqrt(252)
    double mean_positive_count = 0.0;
    double mean_negative_count = 0.0;
};

struct SummaryStats {
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

// fraction of positions where predicted == actual; dates must align
double accuracy(const SignalSeries& predicted, const SignalSeries& actual);

// Eq.-style dot product: returns counted where the signal is 1 (long-only)
double cumulative_log_return(const SignalSeries& signals,
                             const ReturnSeries& returns);

// mean / population-sd of daily strategy returns, annualized by sqrt(252);
// throws NumericError when the strategy return stream has zero variance
double sharpe_ratio(const SignalSeries& signals, const ReturnSeries& returns);

// population sd of the daily strategy return stream (signal_t * return_t)
double strategy_daily_sd(const SignalSeries& signals,
                         const ReturnSeries& returns);

std::pair<int, int> signal_counts(const SignalSeries& signals);

// cumulative = sum of all returns; accuracy = positive-target fraction
std::pair<double, double> buy_and_hold_baseline(const ReturnSeries& test_returns,
                                                const SignalSeries& test_targets);

struct MeanCi {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

// normal-approximation interval mean +- 1.96 * s/sqrt(n), sample sd
MeanCi mean_ci(const std::vector<double>& values);

// biased moment estimators m_k / m_2^{k/2}; kurtosis is excess (Fisher)
SummaryStats summary_stats(const ReturnSeries& returns);

// pairwise Pearson coefficients on the intersection of dates; diagonal 1
struct CorrMatrix {
    std::vector<std::string> symbols;
    Matrix values;
};
CorrMatrix pearson_corr_matrix(
    const std::map<std::string, ReturnSeries>& returns_by_symbol);

struct AcfResult {
    std::vector<double> coefficients; // lags 1..max_lag
    double ci_half_width = 0.0;       // 1.96 / sqrt(N)
};
AcfResult acf(const std::vector<double>& series, int max_lag);

} // namespace emh
