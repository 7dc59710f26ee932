#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace hhws {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws std::invalid_argument on malformed or impossible dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);

int year_of(Date d);

/// Inclusive calendar window repeated every year, e.g. May 1 to Sep 30.
struct SeasonWindow {
  unsigned start_month = 5;
  unsigned start_day = 1;
  unsigned end_month = 9;
  unsigned end_day = 30;

  [[nodiscard]] bool contains(Date d) const;
  /// 1 on the first day of the season in the date's year.
  [[nodiscard]] int day_of_season(Date d) const;
};

}  // namespace hhws
