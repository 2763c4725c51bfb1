#include "seqchoice/timeutil.hpp"

#include <cstdio>

#include "seqchoice/common.hpp"

namespace seqchoice {

std::int64_t days_from_civil(CivilDate d) {
  int y = d.year;
  const int m = d.month;
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                       static_cast<unsigned>(d.day) - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (m <= 2)), static_cast<int>(m), static_cast<int>(d)};
}

namespace {

bool read_fixed_int(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = 0; i < n; ++i) {
    char c = s[pos + i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace

std::int64_t parse_date(std::string_view s) {
  int y, mo, d;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !read_fixed_int(s, 0, 4, y) ||
      !read_fixed_int(s, 5, 2, mo) || !read_fixed_int(s, 8, 2, d) || mo < 1 || mo > 12 ||
      d < 1 || d > 31) {
    fail(Errc::BadValue, "bad date '" + std::string(s) + "' (want YYYY-MM-DD)");
  }
  return days_from_civil({y, mo, d});
}

Minute parse_minute(std::string_view s) {
  if (s.size() != 16 || s[10] != 'T' || s[13] != ':') {
    fail(Errc::BadValue, "bad timestamp '" + std::string(s) + "' (want YYYY-MM-DDTHH:MM)");
  }
  std::int64_t day = parse_date(s.substr(0, 10));
  int hh, mm;
  if (!read_fixed_int(s, 11, 2, hh) || !read_fixed_int(s, 14, 2, mm) || hh > 23 || mm > 59) {
    fail(Errc::BadValue, "bad timestamp '" + std::string(s) + "'");
  }
  return day * kMinutesPerDay + hh * 60 + mm;
}

std::string format_date(std::int64_t days) {
  CivilDate c = civil_from_days(days);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", c.year, c.month, c.day);
  return buf;
}

std::string format_minute(Minute m) {
  std::int64_t day = day_of_minute(m);
  int mod = minute_of_day(m);
  char buf[24];
  CivilDate c = civil_from_days(day);
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d", c.year, c.month, c.day, mod / 60,
                mod % 60);
  return buf;
}

}  // namespace seqchoice
