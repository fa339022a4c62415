#pragma once

#include <compare>
#include <string>

namespace emh {

// Calendar day. Ordering is field-wise; no arithmetic is needed because the
// pipeline treats dates as alignment keys only.
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    auto operator<=>(const Date&) const = default;

    // "YYYY-MM-DD"; throws ParseError on malformed or impossible dates
    static Date parse(const std::string& iso);

    std::string to_string() const;
};

} // namespace emh
