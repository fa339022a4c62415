#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "emh/market_data.hpp"
#include "emh/matrix.hpp"

namespace emh {

struct ReturnObservation {
    Date date;
    double log_return = 0.0;
};

// Daily log returns ln(P_t) - ln(P_{t-1}) on the asset's own axis.
struct ReturnSeries {
    std::string symbol;
    std::vector<ReturnObservation> observations;

    std::size_t size() const { return observations.size(); }
    std::vector<double> values() const;
};

struct SignalObservation {
    Date date;
    int signal = 0; // 0 or 1
};

struct SignalSeries {
    std::vector<SignalObservation> observations;

    std::size_t size() const { return observations.size(); }
    std::vector<int> values() const;
};

// One of the experiment's input-feature sets. Ids 1..6 are ordered prefixes
// of (btc, spx, rut, eurusd, tnx, xau); id 0 is the synthetic noise
// benchmark drawn with Bitcoin's return variance.
struct FeatureSetSpec {
    int id = 0;
    std::string name;
    std::vector<std::string> feature_symbols;
    bool synthetic = false;
};

// the seven canonical sets, in report order (0..6)
std::vector<FeatureSetSpec> canonical_feature_sets();

// Per-column fitted min/max for the affine [0,1] rescaling.
struct ScalerParams {
    std::vector<std::string> columns;
    std::vector<double> x_min;
    std::vector<double> x_max;
};

// Fully materialized modeling table: no missing values anywhere, one row
// per retained date, binary target aligned to the rows.
struct Dataset {
    std::vector<Date> dates;
    Matrix features;
    std::vector<int> target;
    // raw same-date log return of the target asset, one per row; the
    // backtest needs the realized returns behind the binary target
    std::vector<double> target_returns;
    std::vector<std::string> column_names;

    std::size_t rows() const { return dates.size(); }

    SignalSeries target_series() const;
    ReturnSeries target_return_series() const;
};

ReturnSeries log_returns(const PriceSeries& prices);

// positional shift by k: the value dated t moves to position t+k;
// the first k positions fall away
ReturnSeries lag(const ReturnSeries& returns, int k);

// 1 where the same-date return is >= 0, else 0
SignalSeries make_target(const ReturnSeries& btc_returns);

// i.i.d. N(0, var) noise on the same dates, var = unbiased sample variance
// of the given returns; deterministic per seed
ReturnSeries gen_rnorm(const ReturnSeries& btc_returns, std::uint64_t seed);

// Builds the modeling dataset from an aligned table. Per-column returns are
// differenced on the aligned date axis (adjacent rows), lagged positionally,
// and a row is retained only when the target and the lagged returns of
// EVERY table column are present -- all feature sets built from one table
// therefore share a single row skeleton. The spec's feature columns (or the
// synthetic noise column) are then selected in order.
Dataset build_feature_matrix(const FeatureSetSpec& spec,
                             const AlignedTable& table, std::uint64_t seed,
                             const std::vector<int>& lags = {1},
                             const std::string& target_symbol = "btc");

// Eq.-style min-max rescale of each feature column using min/max fitted on
// rows [fit_begin, fit_end); values outside the fit range land outside
// [0,1]. The target is untouched.
std::pair<Dataset, ScalerParams> minmax_normalize(const Dataset& dataset,
                                                  std::size_t fit_begin,
                                                  std::size_t fit_end);

struct SplitResult {
    Dataset train;
    Dataset validation;
    Dataset test;
};

// Chronological partition: the first floor(n * train_frac) rows form the
// training block, the rest the test block; the trailing ceil(10%) of the
// training block becomes validation.
SplitResult split(const Dataset& dataset, double train_frac = 0.6,
                  double val_frac_of_train = 0.1);

} // namespace emh
