#include "uplearn/dates.hpp"

#include <chrono>
#include <cstdio>

namespace uplearn {

std::optional<int> parse_date_days(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  for (int i : {0, 1, 2, 3}) {
    if (iso[i] < '0' || iso[i] > '9') return std::nullopt;
    y = y * 10 + (iso[i] - '0');
  }
  for (int i : {5, 6}) {
    if (iso[i] < '0' || iso[i] > '9') return std::nullopt;
    m = m * 10 + (iso[i] - '0');
  }
  for (int i : {8, 9}) {
    if (iso[i] < '0' || iso[i] > '9') return std::nullopt;
    d = d * 10 + (iso[i] - '0');
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(m)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok()) return std::nullopt;
  return static_cast<int>(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

std::string format_date(int days) {
  const std::chrono::sys_days sd{std::chrono::days{days}};
  const std::chrono::year_month_day ymd{sd};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return std::string(buf);
}

}  // namespace uplearn
