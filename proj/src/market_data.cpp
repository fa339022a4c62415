#include "emh/market_data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <httplib.h>

#include "emh/errors.hpp"

namespace emh {

PriceSeries PriceSeries::create(std::string symbol,
                                std::vector<Observation> obs) {
    if (obs.empty())
        throw ValidationError("price series '" + symbol + "' is empty");
    std::sort(obs.begin(), obs.end(),
              [](const Observation& a, const Observation& b) {
                  return a.date < b.date;
              });
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!(obs[i].price > 0.0))
            throw ValidationError("non-positive price " +
                                  std::to_string(obs[i].price) + " on " +
                                  obs[i].date.to_string());
        if (i > 0 && !(obs[i - 1].date < obs[i].date))
            throw ValidationError("duplicate date " + obs[i].date.to_string() +
                                  " in series '" + symbol + "'");
    }
    return PriceSeries{std::move(symbol), std::move(obs)};
}

namespace {

PriceSeries parse_csv_text(std::istream& in, const std::string& symbol,
                           const std::string& origin) {
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(origin + ": empty file");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    if (line != "date,adj_close")
        throw ParseError(origin + ": expected header 'date,adj_close', got '" +
                         line + "'");

    std::vector<Observation> obs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(origin + ":" + std::to_string(line_no) +
                             ": missing comma");
        Date date;
        try {
            date = Date::parse(line.substr(0, comma));
        } catch (const ParseError& e) {
            throw ParseError(origin + ":" + std::to_string(line_no) + ": " +
                             e.what());
        }
        const std::string num = line.substr(comma + 1);
        char* endp = nullptr;
        const double price = std::strtod(num.c_str(), &endp);
        if (endp == num.c_str() || *endp != '\0')
            throw ParseError(origin + ":" + std::to_string(line_no) +
                             ": bad price '" + num + "'");
        obs.push_back({date, price});
    }
    return PriceSeries::create(symbol, std::move(obs));
}

} // namespace

PriceSeries load_csv(const std::filesystem::path& path,
                     const std::string& symbol) {
    std::ifstream in(path);
    if (!in)
        throw StorageError("cannot open '" + path.string() + "'");
    const std::string name = symbol.empty() ? path.stem().string() : symbol;
    return parse_csv_text(in, name, path.string());
}

void write_csv(const PriceSeries& series, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw StorageError("cannot write '" + path.string() + "'");
    out << "date,adj_close\n";
    char buf[64];
    for (const auto& o : series.observations) {
        std::snprintf(buf, sizeof buf, "%.17g", o.price);
        out << o.date.to_string() << ',' << buf << '\n';
    }
    if (!out)
        throw StorageError("write failed for '" + path.string() + "'");
}

HttpCsvSource::HttpCsvSource(std::string host, int port,
                             std::string base_path)
    : host_(std::move(host)), port_(port), base_path_(std::move(base_path)) {}

PriceSeries HttpCsvSource::fetch(const std::string& symbol, const Date& start,
                                 const Date& end) {
    httplib::Client cli(host_, port_);
    cli.set_connection_timeout(5);
    cli.set_read_timeout(10);
    const std::string target = base_path_ + "/" + symbol +
                               ".csv?start=" + start.to_string() +
                               "&end=" + end.to_string();
    auto res = cli.Get(target);
    if (!res)
        throw FetchError("transport failure fetching " + symbol + " from " +
                         host_ + ":" + std::to_string(port_));
    if (res->status == 404)
        throw NotFoundError("unknown symbol '" + symbol + "'");
    if (res->status != 200)
        throw FetchError("HTTP " + std::to_string(res->status) + " for " +
                         symbol);
    if (res->body.empty())
        throw NoDataError("empty payload for '" + symbol + "'");
    std::istringstream in(res->body);
    return parse_csv_text(in, symbol, host_ + target);
}

PriceSeries fetch_remote(DailyBarSource& source, const std::string& symbol,
                         const Date& start, const Date& end,
                         int max_retries) {
    if (!(start < end))
        throw ValidationError("empty date range [" + start.to_string() + ", " +
                              end.to_string() + ")");
    int attempt = 0;
    for (;;) {
        try {
            PriceSeries s = source.fetch(symbol, start, end);
            if (s.observations.empty())
                throw NoDataError("no observations for '" + symbol + "'");
            // clamp to [start, end) in case the source over-delivers
            std::vector<Observation> kept;
            for (const auto& o : s.observations)
                if (!(o.date < start) && o.date < end)
                    kept.push_back(o);
            if (kept.empty())
                throw NoDataError("no observations in range for '" + symbol +
                                  "'");
            return PriceSeries::create(symbol, std::move(kept));
        } catch (const FetchError&) {
            if (++attempt > max_retries)
                throw;
        }
    }
}

namespace {

// serializes concurrent fetches of the same cache key within the process;
// readers only ever see complete files thanks to the rename below
std::mutex& cache_key_mutex(const std::string& key) {
    static std::mutex registry_mutex;
    static std::unordered_map<std::string, std::mutex> registry;
    std::scoped_lock lk(registry_mutex);
    return registry[key];
}

} // namespace

PriceSeries cache_get_or_fetch(DailyBarSource& source,
                               const std::string& symbol, const Date& start,
                               const Date& end,
                               const std::filesystem::path& cache_dir) {
    const std::string key =
        symbol + "_" + start.to_string() + "_" + end.to_string();
    std::scoped_lock lk(cache_key_mutex(key));

    const auto path = cache_dir / (key + ".csv");
    if (std::filesystem::exists(path)) {
        try {
            return load_csv(path, symbol);
        } catch (const Error&) {
            // corrupt entry: fall through to refetch and rewrite
        }
    }

    PriceSeries fetched = fetch_remote(source, symbol, start, end);
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    const auto tmp = cache_dir / (key + ".csv.tmp." +
                                  std::to_string(std::hash<std::thread::id>{}(
                                      std::this_thread::get_id())));
    try {
        write_csv(fetched, tmp);
        std::filesystem::rename(tmp, path);
    } catch (const std::exception& e) {
        std::filesystem::remove(tmp, ec);
        throw StorageError("cache write failed for '" + path.string() +
                           "': " + e.what());
    }
    return fetched;
}

AlignedTable align_by_date(const std::vector<PriceSeries>& series_list) {
    if (series_list.empty())
        throw ValidationError("align_by_date: no input series");

    std::set<Date> axis;
    for (const auto& s : series_list)
        for (const auto& o : s.observations)
            axis.insert(o.date);

    AlignedTable table;
    table.dates.assign(axis.begin(), axis.end());

    std::map<Date, std::size_t> index;
    for (std::size_t i = 0; i < table.dates.size(); ++i)
        index[table.dates[i]] = i;

    for (const auto& s : series_list) {
        table.symbols.push_back(s.symbol);
        auto& col = table.columns[s.symbol];
        col.assign(table.dates.size(), std::nullopt);
        for (const auto& o : s.observations)
            col[index[o.date]] = o.price;
    }
    return table;
}

} // namespace emh
