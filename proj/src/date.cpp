#include "emh/date.hpp"

#include <array>
#include <charconv>
#include <cstdio>

#include "emh/errors.hpp"

namespace emh {

namespace {

bool is_leap(int y) {
    return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
}

int days_in_month(int y, int m) {
    static constexpr std::array<int, 12> base = {31, 28, 31, 30, 31, 30,
                                                 31, 31, 30, 31, 30, 31};
    return (m == 2 && is_leap(y)) ? 29 : base[m - 1];
}

int parse_int(const std::string& s, size_t pos, size_t len) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (ec != std::errc() || ptr != s.data() + pos + len)
        throw ParseError("invalid date field in '" + s + "'");
    return v;
}

} // namespace

Date Date::parse(const std::string& iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-')
        throw ParseError("expected ISO-8601 date, got '" + iso + "'");
    Date d{parse_int(iso, 0, 4), parse_int(iso, 5, 2), parse_int(iso, 8, 2)};
    if (d.month < 1 || d.month > 12 || d.day < 1 ||
        d.day > days_in_month(d.year, d.month))
        throw ParseError("impossible calendar date '" + iso + "'");
    return d;
}

std::string Date::to_string() const {
    char buf[11];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

} // namespace emh
