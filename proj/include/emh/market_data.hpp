#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emh/date.hpp"

namespace emh {

struct Observation {
    Date date;
    double price = 0.0; // adjusted close, quote currency
};

// Daily adjusted closes for one asset. Immutable after construction;
// dates strictly increasing, prices strictly positive, never empty.
struct PriceSeries {
    std::string symbol;
    std::vector<Observation> observations;

    // sorts by date and checks the invariants; throws ValidationError
    static PriceSeries create(std::string symbol,
                              std::vector<Observation> obs);

    std::size_t size() const { return observations.size(); }
};

// Outer join of several PriceSeries on calendar date. Slots where an asset
// did not trade stay empty; nothing is ever interpolated or filled forward.
struct AlignedTable {
    std::vector<Date> dates;
    std::vector<std::string> symbols; // column order
    // columns[symbol][i] pairs with dates[i]
    std::map<std::string, std::vector<std::optional<double>>> columns;

    bool has_symbol(const std::string& s) const {
        return columns.contains(s);
    }
};

// CSV fixture format: header `date,adj_close`, ISO-8601 dates, decimal
// prices, UTF-8, newline-terminated. Rows may appear in any order.
PriceSeries load_csv(const std::filesystem::path& path,
                     const std::string& symbol = "");

void write_csv(const PriceSeries& series, const std::filesystem::path& path);

// Daily-bar source abstraction; the bundled fixtures are the default
// source, a remote HTTP endpoint is optional.
class DailyBarSource {
public:
    virtual ~DailyBarSource() = default;
    // adjusted closes for [start, end); may throw FetchError (retryable),
    // NotFoundError, or NoDataError
    virtual PriceSeries fetch(const std::string& symbol, const Date& start,
                              const Date& end) = 0;
};

// Serves `date,adj_close` CSV over HTTP:
//   GET <base>/<symbol>.csv?start=YYYY-MM-DD&end=YYYY-MM-DD
class HttpCsvSource : public DailyBarSource {
public:
    HttpCsvSource(std::string host, int port, std::string base_path = "");
    PriceSeries fetch(const std::string& symbol, const Date& start,
                      const Date& end) override;

private:
    std::string host_;
    int port_;
    std::string base_path_;
};

// Retry wrapper: transient transport failures are retried up to
// max_retries times; NotFound/NoData are not retried.
PriceSeries fetch_remote(DailyBarSource& source, const std::string& symbol,
                         const Date& start, const Date& end,
                         int max_retries = 3);

// First call fetches and persists <symbol>_<start>_<end>.csv under
// cache_dir; later identical calls read the file back and stay offline.
// A corrupt cache entry is refetched and rewritten. Concurrent calls for
// the same key serialize; readers never observe partial files.
PriceSeries cache_get_or_fetch(DailyBarSource& source,
                               const std::string& symbol, const Date& start,
                               const Date& end,
                               const std::filesystem::path& cache_dir);

AlignedTable align_by_date(const std::vector<PriceSeries>& series_list);

} // namespace emh
