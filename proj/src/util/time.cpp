#include "biopay/util/time.hpp"

#include <array>
#include <cctype>
#include <cstdio>
#include <cstring>

namespace biopay::util {

using namespace std::chrono;

Timestamp system_now() { return time_point_cast<milliseconds>(system_clock::now()); }

std::string format_rfc3339(Timestamp t) {
  const auto day = floor<days>(t);
  const year_month_day ymd{day};
  const hh_mm_ss<milliseconds> tod{t - day};
  char buf[40];
  int n = std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", int(ymd.year()),
                        unsigned(ymd.month()), unsigned(ymd.day()), int(tod.hours().count()),
                        int(tod.minutes().count()), int(tod.seconds().count()));
  if (const auto ms = tod.subseconds().count(); ms != 0) {
    n += std::snprintf(buf + n, sizeof buf - n, ".%03d", int(ms));
  }
  std::snprintf(buf + n, sizeof buf - n, "Z");
  return buf;
}

namespace {

std::optional<Timestamp> civil(int y, int mo, int d, int h, int mi, int s, long ms,
                               int offset_minutes) {
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) return std::nullopt;
  return Timestamp{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms} -
         minutes{offset_minutes};
}

bool digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  out = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

}  // namespace

std::optional<Timestamp> parse_rfc3339(std::string_view s) {
  int y, mo, d, h, mi, sec;
  if (s.size() < 20 || !digits(s, 0, 4, y) || s[4] != '-' || !digits(s, 5, 2, mo) ||
      s[7] != '-' || !digits(s, 8, 2, d) || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') ||
      !digits(s, 11, 2, h) || s[13] != ':' || !digits(s, 14, 2, mi) || s[16] != ':' ||
      !digits(s, 17, 2, sec)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  long ms = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int scale = 100;
    const std::size_t start = pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
      ms += (s[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
    if (pos == start) return std::nullopt;
  }
  if (pos >= s.size()) return std::nullopt;
  int offset = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int oh, om;
    if (!digits(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !digits(s, pos + 4, 2, om)) {
      return std::nullopt;
    }
    offset = (s[pos] == '-' ? -1 : 1) * (oh * 60 + om);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;
  return civil(y, mo, d, h, mi, sec, ms, offset);
}

std::optional<Timestamp> parse_mail_date(std::string_view text) {
  std::string s(text);
  if (auto comma = s.find(','); comma != std::string::npos) s = s.substr(comma + 1);
  int d, y, h, mi, sec = 0;
  char mon[4] = {};
  char zone[8] = {};
  if (std::sscanf(s.c_str(), " %d %3s %d %d:%d:%d %7s", &d, mon, &y, &h, &mi, &sec, zone) < 7) {
    return std::nullopt;
  }
  static constexpr std::array<const char*, 12> kMonths = {
      "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  int mo = 0;
  for (int i = 0; i < 12; ++i) {
    if (std::strncmp(mon, kMonths[i], 3) == 0) mo = i + 1;
  }
  if (mo == 0) return std::nullopt;
  int offset = 0;
  const std::string z(zone);
  if (z.size() == 5 && (z[0] == '+' || z[0] == '-')) {
    int hhmm;
    if (!digits(z, 1, 4, hhmm)) return std::nullopt;
    offset = (z[0] == '-' ? -1 : 1) * (hhmm / 100 * 60 + hhmm % 100);
  } else if (z != "GMT" && z != "UT" && z != "UTC" && z != "Z") {
    return std::nullopt;
  }
  return civil(y, mo, d, h, mi, sec, 0, offset);
}

}  // namespace biopay::util
