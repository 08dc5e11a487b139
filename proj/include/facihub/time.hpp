#pragma once

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "facihub/error.hpp"

namespace facihub {

/// UTC instant at second resolution.
using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;

namespace detail {

inline bool parse_digits(std::string_view s, std::size_t pos, std::size_t count, int& out) {
  if (pos + count > s.size()) return false;
  int value = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    const char c = s[i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  return true;
}

}  // namespace detail

/// Parses YYYY-MM-DD.
inline std::optional<Date> parse_date(std::string_view s) {
  int y = 0, m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  if (!detail::parse_digits(s, 0, 4, y) || !detail::parse_digits(s, 5, 2, m) ||
      !detail::parse_digits(s, 8, 2, d))
    return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return Date{ymd};
}

/// Parses an ISO-8601 date-time with an explicit zone designator ("Z" or
/// +HH:MM / -HH:MM / +HHMM) and normalizes to UTC. Fractional seconds are
/// truncated. Zone-less inputs are rejected.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  if (s.size() < 20) return std::nullopt;
  const auto date = parse_date(s.substr(0, 10));
  if (!date) return std::nullopt;
  if (s[10] != 'T' && s[10] != 't' && s[10] != ' ') return std::nullopt;
  int hh = 0, mm = 0, ss = 0;
  if (!detail::parse_digits(s, 11, 2, hh) || s[13] != ':' || !detail::parse_digits(s, 14, 2, mm) ||
      s[16] != ':' || !detail::parse_digits(s, 17, 2, ss))
    return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  std::size_t pos = 19;
  if (pos < s.size() && (s[pos] == '.' || s[pos] == ',')) {
    ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return std::nullopt;
  }
  if (pos >= s.size()) return std::nullopt;
  int offset_minutes = 0;
  const char zone = s[pos];
  if (zone == 'Z' || zone == 'z') {
    ++pos;
  } else if (zone == '+' || zone == '-') {
    int oh = 0, om = 0;
    if (!detail::parse_digits(s, pos + 1, 2, oh)) return std::nullopt;
    std::size_t next = pos + 3;
    if (next < s.size() && s[next] == ':') ++next;
    if (!detail::parse_digits(s, next, 2, om)) return std::nullopt;
    if (oh > 23 || om > 59) return std::nullopt;
    offset_minutes = (oh * 60 + om) * (zone == '+' ? 1 : -1);
    pos = next + 2;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;
  using namespace std::chrono;
  const Timestamp local = *date + hours{hh} + minutes{mm} + seconds{ss};
  return local - minutes{offset_minutes};
}

inline Timestamp require_timestamp(std::string_view s) {
  auto ts = parse_timestamp(s);
  if (!ts) fail(ErrorCode::argument, "unparsable timestamp '" + std::string(s) + "'");
  return *ts;
}

inline std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Formats as YYYY-MM-DDTHH:MM:SSZ.
inline std::string format_timestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day = floor<days>(t);
  const hh_mm_ss tod{t - day};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(day).c_str(),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()));
  return buf;
}

inline Date date_of(Timestamp t) { return std::chrono::floor<std::chrono::days>(t); }

inline int hour_of(Timestamp t) {
  const auto since_midnight = t - std::chrono::floor<std::chrono::days>(t);
  return static_cast<int>(std::chrono::duration_cast<std::chrono::hours>(since_midnight).count());
}

/// ISO-8601 week label, e.g. "2025-W48". Weeks start on Monday and week 1
/// contains the year's first Thursday.
inline std::string iso_week(Timestamp t) {
  using namespace std::chrono;
  const sys_days day = date_of(t);
  const weekday wd{day};
  const int iso_wd = wd.iso_encoding();  // Mon=1 .. Sun=7
  const sys_days thursday = day + days{4 - iso_wd};
  const year_month_day thu{thursday};
  const sys_days jan1 = sys_days{thu.year() / January / 1};
  const int week = static_cast<int>((thursday - jan1).count() / 7) + 1;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-W%02d", static_cast<int>(thu.year()), week);
  return buf;
}

}  // namespace facihub
