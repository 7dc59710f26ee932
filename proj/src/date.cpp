#include "hhws/date.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace hhws {

namespace {

int parse_field(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  const char* first = text.data() + pos;
  const char* last = first + len;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("malformed date '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw std::invalid_argument("malformed date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{parse_field(text, 0, 4)},
                           month{static_cast<unsigned>(parse_field(text, 5, 2))},
                           day{static_cast<unsigned>(parse_field(text, 8, 2))}};
  if (!ymd.ok()) {
    throw std::invalid_argument("invalid calendar date '" + std::string(text) + "'");
  }
  return sys_days{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int year_of(Date d) { return static_cast<int>(std::chrono::year_month_day{d}.year()); }

bool SeasonWindow::contains(Date d) const {
  const std::chrono::year_month_day ymd{d};
  const unsigned key = static_cast<unsigned>(ymd.month()) * 100 + static_cast<unsigned>(ymd.day());
  const unsigned lo = start_month * 100 + start_day;
  const unsigned hi = end_month * 100 + end_day;
  return key >= lo && key <= hi;
}

int SeasonWindow::day_of_season(Date d) const {
  using namespace std::chrono;
  const year_month_day ymd{d};
  const sys_days start{year_month_day{ymd.year(), month{start_month}, day{start_day}}};
  return static_cast<int>((d - start).count()) + 1;
}

}  // namespace hhws
