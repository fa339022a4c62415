#include "emh/eval.hpp"

#include <algorithm>
#include <cmath>

#include "emh/errors.hpp"

namespace emh {

namespace {

void check_alignment(std::size_t an, std::size_t bn, const char* what) {
    if (an != bn || an == 0)
        throw ValidationError(std::string(what) + ": misaligned series (" +
                              std::to_string(an) + " vs " +
                              std::to_string(bn) + ")");
}

std::vector<double> strategy_returns(const SignalSeries& signals,
                                     const ReturnSeries& returns) {
    check_alignment(signals.size(), returns.size(), "strategy returns");
    std::vector<double> out(signals.size());
    for (std::size_t i = 0; i < signals.size(); ++i) {
        if (signals.observations[i].date != returns.observations[i].date)
            throw ValidationError("strategy returns: date mismatch at " +
                                  signals.observations[i].date.to_string());
        out[i] = signals.observations[i].signal *
                 returns.observations[i].log_return;
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

} // namespace

double accuracy(const SignalSeries& predicted, const SignalSeries& actual) {
    check_alignment(predicted.size(), actual.size(), "accuracy");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted.observations[i].date != actual.observations[i].date)
            throw ValidationError("accuracy: date mismatch at " +
                                  predicted.observations[i].date.to_string());
        hit += predicted.observations[i].signal ==
               actual.observations[i].signal;
    }
    return static_cast<double>(hit) / static_cast<double>(predicted.size());
}

double cumulative_log_return(const SignalSeries& signals,
                             const ReturnSeries& returns) {
    const auto strat = strategy_returns(signals, returns);
    double sum = 0.0;
    for (double r : strat)
        sum += r;
    return sum;
}

double strategy_daily_sd(const SignalSeries& signals,
                         const ReturnSeries& returns) {
    const auto strat = strategy_returns(signals, returns);
    const double mu = mean_of(strat);
    double ss = 0.0;
    for (double r : strat)
        ss += (r - mu) * (r - mu);
    return std::sqrt(ss / static_cast<double>(strat.size()));
}

double sharpe_ratio(const SignalSeries& signals, const ReturnSeries& returns) {
    const auto strat = strategy_returns(signals, returns);
    const double mu = mean_of(strat);
    double ss = 0.0;
    for (double r : strat)
        ss += (r - mu) * (r - mu);
    const double sd = std::sqrt(ss / static_cast<double>(strat.size()));
    if (!(sd > 0.0))
        throw NumericError("sharpe_ratio: zero-variance strategy returns");
    return mu / sd * std::sqrt(252.0);
}

std::pair<int, int> signal_counts(const SignalSeries& signals) {
    if (signals.observations.empty())
        throw ValidationError("signal_counts: empty series");
    int pos = 0;
    for (const auto& o : signals.observations)
        pos += o.signal;
    return {pos, static_cast<int>(signals.size()) - pos};
}

std::pair<double, double> buy_and_hold_baseline(
    const ReturnSeries& test_returns, const SignalSeries& test_targets) {
    check_alignment(test_returns.size(), test_targets.size(), "buy and hold");
    double cum = 0.0;
    int pos = 0;
    for (std::size_t i = 0; i < test_returns.size(); ++i) {
        cum += test_returns.observations[i].log_return;
        pos += test_targets.observations[i].signal;
    }
    return {cum, static_cast<double>(pos) /
                     static_cast<double>(test_targets.size())};
}

MeanCi mean_ci(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2)
        throw ValidationError("mean_ci: need at least 2 values");
    const double mu = mean_of(values);
    double ss = 0.0;
    for (double x : values)
        ss += (x - mu) * (x - mu);
    const double s = std::sqrt(ss / static_cast<double>(n - 1));
    const double half = 1.96 * s / std::sqrt(static_cast<double>(n));
    return {mu, mu - half, mu + half};
}

SummaryStats summary_stats(const ReturnSeries& returns) {
    const auto v = returns.values();
    if (v.size() < 4)
        throw ValidationError("summary_stats: need at least 4 returns");
    SummaryStats st;
    st.mean = mean_of(v);
    st.min = *std::min_element(v.begin(), v.end());
    st.max = *std::max_element(v.begin(), v.end());
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d = x - st.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    const double n = static_cast<double>(v.size());
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (!(m2 > 0.0))
        throw NumericError("summary_stats: zero variance");
    st.skewness = m3 / std::pow(m2, 1.5);
    st.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    return st;
}

CorrMatrix pearson_corr_matrix(
    const std::map<std::string, ReturnSeries>& returns_by_symbol) {
    CorrMatrix out;
    for (const auto& [sym, _] : returns_by_symbol)
        out.symbols.push_back(sym);
    const std::size_t k = out.symbols.size();
    out.values = Matrix(k, k);

    auto pearson = [](const ReturnSeries& a, const ReturnSeries& b) {
        std::vector<double> xs, ys;
        std::size_t j = 0;
        for (const auto& oa : a.observations) {
            while (j < b.size() && b.observations[j].date < oa.date)
                ++j;
            if (j < b.size() && b.observations[j].date == oa.date) {
                xs.push_back(oa.log_return);
                ys.push_back(b.observations[j].log_return);
            }
        }
        if (xs.size() < 2)
            throw ValidationError("pearson: fewer than 2 common dates");
        const double mx = mean_of(xs), my = mean_of(ys);
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
            syy += (ys[i] - my) * (ys[i] - my);
        }
        if (!(sxx > 0.0) || !(syy > 0.0))
            throw NumericError("pearson: constant series");
        return sxy / std::sqrt(sxx * syy);
    };

    for (std::size_t i = 0; i < k; ++i) {
        out.values(i, i) = 1.0;
        for (std::size_t j = i + 1; j < k; ++j) {
            const double r = pearson(returns_by_symbol.at(out.symbols[i]),
                                     returns_by_symbol.at(out.symbols[j]));
            out.values(i, j) = r;
            out.values(j, i) = r;
        }
    }
    return out;
}

AcfResult acf(const std::vector<double>& series, int max_lag) {
    const auto n = static_cast<long>(series.size());
    if (max_lag < 1 || n <= max_lag + 1)
        throw ValidationError("acf: series too short for max_lag " +
                              std::to_string(max_lag));
    double mu = 0.0;
    for (double x : series)
        mu += x;
    mu /= static_cast<double>(n);
    double denom = 0.0;
    for (double x : series)
        denom += (x - mu) * (x - mu);
    if (!(denom > 0.0))
        throw NumericError("acf: constant series");

    AcfResult out;
    out.ci_half_width = 1.96 / std::sqrt(static_cast<double>(n));
    out.coefficients.reserve(static_cast<std::size_t>(max_lag));
    for (int k = 1; k <= max_lag; ++k) {
        double num = 0.0;
        for (long t = k; t < n; ++t)
            num += (series[static_cast<std::size_t>(t)] - mu) *
                   (series[static_cast<std::size_t>(t - k)] - mu);
        out.coefficients.push_back(num / denom);
    }
    return out;
}

} // namespace emh
