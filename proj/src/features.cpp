#include "emh/features.hpp"

#include <cmath>
#include <limits>

#include "emh/errors.hpp"
#include "emh/rng.hpp"

namespace emh {

std::vector<double> ReturnSeries::values() const {
    std::vector<double> v;
    v.reserve(observations.size());
    for (const auto& o : observations)
        v.push_back(o.log_return);
    return v;
}

std::vector<int> SignalSeries::values() const {
    std::vector<int> v;
    v.reserve(observations.size());
    for (const auto& o : observations)
        v.push_back(o.signal);
    return v;
}

SignalSeries Dataset::target_series() const {
    SignalSeries out;
    out.observations.reserve(rows());
    for (std::size_t i = 0; i < rows(); ++i)
        out.observations.push_back({dates[i], target[i]});
    return out;
}

ReturnSeries Dataset::target_return_series() const {
    ReturnSeries out{"target", {}};
    out.observations.reserve(rows());
    for (std::size_t i = 0; i < rows(); ++i)
        out.observations.push_back({dates[i], target_returns[i]});
    return out;
}

std::vector<FeatureSetSpec> canonical_feature_sets() {
    const std::vector<std::string> order = {"btc",    "spx", "rut",
                                            "eurusd", "tnx", "xau"};
    std::vector<FeatureSetSpec> sets;
    sets.push_back({0, "rnorm", {"rnorm"}, true});
    for (int k = 1; k <= 6; ++k) {
        FeatureSetSpec s;
        s.id = k;
        s.feature_symbols.assign(order.begin(), order.begin() + k);
        s.name = s.feature_symbols[0];
        for (int i = 1; i < k; ++i)
            s.name += "+" + s.feature_symbols[i];
        sets.push_back(std::move(s));
    }
    return sets;
}

ReturnSeries log_returns(const PriceSeries& prices) {
    if (prices.size() < 2)
        throw ValidationError("log_returns: need at least 2 prices for '" +
                              prices.symbol + "'");
    ReturnSeries out{prices.symbol, {}};
    out.observations.reserve(prices.size() - 1);
    for (std::size_t i = 1; i < prices.size(); ++i) {
        const auto& cur = prices.observations[i];
        const auto& prev = prices.observations[i - 1];
        out.observations.push_back(
            {cur.date, std::log(cur.price) - std::log(prev.price)});
    }
    return out;
}

ReturnSeries lag(const ReturnSeries& returns, int k) {
    if (k < 1)
        throw ValidationError("lag: k must be >= 1");
    if (static_cast<std::size_t>(k) >= returns.size())
        throw ValidationError("lag: shift of " + std::to_string(k) +
                              " empties a series of length " +
                              std::to_string(returns.size()));
    ReturnSeries out{returns.symbol, {}};
    out.observations.reserve(returns.size() - k);
    for (std::size_t i = k; i < returns.size(); ++i)
        out.observations.push_back({returns.observations[i].date,
                                    returns.observations[i - k].log_return});
    return out;
}

SignalSeries make_target(const ReturnSeries& btc_returns) {
    if (btc_returns.observations.empty())
        throw ValidationError("make_target: empty return series");
    SignalSeries out;
    out.observations.reserve(btc_returns.size());
    for (const auto& o : btc_returns.observations)
        out.observations.push_back({o.date, o.log_return >= 0.0 ? 1 : 0});
    return out;
}

ReturnSeries gen_rnorm(const ReturnSeries& btc_returns, std::uint64_t seed) {
    const auto n = btc_returns.size();
    if (n < 2)
        throw ValidationError("gen_rnorm: need at least 2 returns");
    double mean = 0.0;
    for (const auto& o : btc_returns.observations)
        mean += o.log_return;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (const auto& o : btc_returns.observations)
        ss += (o.log_return - mean) * (o.log_return - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    Rng rng(seed);
    ReturnSeries out{"rnorm", {}};
    out.observations.reserve(n);
    for (const auto& o : btc_returns.observations)
        out.observations.push_back({o.date, rng.normal(0.0, sd)});
    return out;
}

namespace {

constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

// per-column returns differenced on the aligned axis: defined at row i only
// when rows i and i-1 both carry a price (a weekend gap kills the Monday
// return, exactly like a shift-by-one on the joined frame)
std::vector<double> aligned_returns(
    const std::vector<std::optional<double>>& col) {
    std::vector<double> r(col.size(), kAbsent);
    for (std::size_t i = 1; i < col.size(); ++i)
        if (col[i] && col[i - 1])
            r[i] = std::log(*col[i]) - std::log(*col[i - 1]);
    return r;
}

} // namespace

Dataset build_feature_matrix(const FeatureSetSpec& spec,
                             const AlignedTable& table, std::uint64_t seed,
                             const std::vector<int>& lags,
                             const std::string& target_symbol) {
    if (!table.has_symbol(target_symbol))
        throw ConfigError("table lacks target symbol '" + target_symbol + "'");
    if (!spec.synthetic)
        for (const auto& s : spec.feature_symbols)
            if (!table.has_symbol(s))
                throw ConfigError("table lacks feature symbol '" + s + "'");
    if (lags.empty())
        throw ConfigError("no lags requested");
    for (int L : lags)
        if (L < 0)
            throw ConfigError("negative lag");

    const std::size_t n = table.dates.size();
    std::map<std::string, std::vector<double>> rets;
    for (const auto& sym : table.symbols)
        rets[sym] = aligned_returns(table.columns.at(sym));

    if (spec.synthetic) {
        // noise column on the target's return dates, lagged like the rest
        ReturnSeries base{target_symbol, {}};
        const auto& tr = rets.at(target_symbol);
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isnan(tr[i]))
                base.observations.push_back({table.dates[i], tr[i]});
        const ReturnSeries noise = gen_rnorm(base, seed);
        std::vector<double> col(n, kAbsent);
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isnan(tr[i]))
                col[i] = noise.observations[k++].log_return;
        rets["rnorm"] = std::move(col);
    }

    // Row mask from EVERY column of the table, so all feature sets built
    // from one table share the same rows (the sample is defined by the
    // table, the spec only selects columns).
    const auto& target_ret = rets.at(target_symbol);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isnan(target_ret[i]))
            continue;
        bool ok = true;
        for (const auto& sym : table.symbols) {
            const auto& r = rets.at(sym);
            for (int L : lags) {
                if (i < static_cast<std::size_t>(L) ||
                    std::isnan(r[i - static_cast<std::size_t>(L)])) {
                    ok = false;
                    break;
                }
            }
            if (!ok)
                break;
        }
        if (ok)
            keep.push_back(i);
    }
    if (keep.empty())
        throw ValidationError("row deletion removed every row");

    Dataset ds;
    ds.dates.reserve(keep.size());
    for (auto i : keep)
        ds.dates.push_back(table.dates[i]);

    for (const auto& sym : spec.feature_symbols)
        for (int L : lags)
            ds.column_names.push_back(sym + "_lag" + std::to_string(L));

    ds.features = Matrix(keep.size(), ds.column_names.size());
    std::size_t c = 0;
    for (const auto& sym : spec.feature_symbols) {
        const auto& r = rets.at(sym);
        for (int L : lags) {
            for (std::size_t row = 0; row < keep.size(); ++row) {
                const double v = r[keep[row] - static_cast<std::size_t>(L)];
                if (std::isnan(v))
                    throw ValidationError("absent value survived row deletion");
                ds.features(row, c) = v;
            }
            ++c;
        }
    }

    ds.target.reserve(keep.size());
    ds.target_returns.reserve(keep.size());
    for (auto i : keep) {
        ds.target.push_back(target_ret[i] >= 0.0 ? 1 : 0);
        ds.target_returns.push_back(target_ret[i]);
    }
    return ds;
}

std::pair<Dataset, ScalerParams> minmax_normalize(const Dataset& dataset,
                                                  std::size_t fit_begin,
                                                  std::size_t fit_end) {
    if (fit_begin >= fit_end || fit_end > dataset.rows())
        throw ValidationError("minmax_normalize: bad fit range");
    ScalerParams params;
    params.columns = dataset.column_names;
    Dataset out = dataset;
    for (std::size_t c = 0; c < dataset.features.cols(); ++c) {
        double lo = dataset.features(fit_begin, c);
        double hi = lo;
        for (std::size_t r = fit_begin; r < fit_end; ++r) {
            lo = std::min(lo, dataset.features(r, c));
            hi = std::max(hi, dataset.features(r, c));
        }
        if (!(hi > lo))
            throw NumericError("constant column '" + dataset.column_names[c] +
                               "' on the fit range");
        params.x_min.push_back(lo);
        params.x_max.push_back(hi);
        for (std::size_t r = 0; r < dataset.rows(); ++r)
            out.features(r, c) = (dataset.features(r, c) - lo) / (hi - lo);
    }
    return {std::move(out), std::move(params)};
}

namespace {

Dataset slice(const Dataset& d, std::size_t begin, std::size_t end) {
    Dataset out;
    out.column_names = d.column_names;
    out.dates.assign(d.dates.begin() + begin, d.dates.begin() + end);
    out.target.assign(d.target.begin() + begin, d.target.begin() + end);
    out.target_returns.assign(d.target_returns.begin() + begin,
                              d.target_returns.begin() + end);
    out.features = d.features.select_rows(begin, end);
    return out;
}

} // namespace

SplitResult split(const Dataset& dataset, double train_frac,
                  double val_frac_of_train) {
    const std::size_t n = dataset.rows();
    const auto block =
        static_cast<std::size_t>(static_cast<double>(n) * train_frac);
    const auto train_rows = static_cast<std::size_t>(
        static_cast<double>(block) * (1.0 - val_frac_of_train));
    const std::size_t val_rows = block - train_rows;
    const std::size_t test_rows = n - block;
    if (train_rows == 0 || val_rows == 0 || test_rows == 0)
        throw ValidationError("split: dataset too small (" +
                              std::to_string(n) + " rows)");
    return {slice(dataset, 0, train_rows), slice(dataset, train_rows, block),
            slice(dataset, block, n)};
}

} // namespace emh
