// timeutil.hpp — calendar-minute arithmetic.
//
// Timestamps are minutes since 1970-01-01T00:00 in local campus time; no time
// zones or DST anywhere in the pipeline. Civil-date conversion uses the
// days_from_civil construction.
#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace seqchoice {

using Minute = std::int64_t;

constexpr std::int64_t kMinutesPerDay = 1440;

struct CivilDate {
  int year;
  int month;  // 1..12
  int day;    // 1..31
};

std::int64_t days_from_civil(CivilDate d);
CivilDate civil_from_days(std::int64_t days);

// Weekday index 0 = Monday .. 6 = Sunday.
inline int weekday_of_day(std::int64_t days) {
  return static_cast<int>(((days % 7) + 10) % 7);  // 1970-01-01 was a Thursday
}

inline std::int64_t day_of_minute(Minute m) {
  // floor division; minutes are non-negative in practice but keep it correct
  return m >= 0 ? m / kMinutesPerDay : (m - (kMinutesPerDay - 1)) / kMinutesPerDay;
}

inline int minute_of_day(Minute m) { return static_cast<int>(m - day_of_minute(m) * kMinutesPerDay); }

inline bool is_weekend(Minute m) { return weekday_of_day(day_of_minute(m)) >= 5; }

// "YYYY-MM-DDTHH:MM"; throws Error(BadValue) on malformed input.
Minute parse_minute(std::string_view s);
std::string format_minute(Minute m);

// "YYYY-MM-DD" -> day index since epoch.
std::int64_t parse_date(std::string_view s);
std::string format_date(std::int64_t days);

}  // namespace seqchoice
