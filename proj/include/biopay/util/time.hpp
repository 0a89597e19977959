#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace biopay::util {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;
using Clock = std::function<Timestamp()>;

Timestamp system_now();

// "2026-03-01T12:00:00Z", with ".mmm" only when milliseconds are non-zero.
std::string format_rfc3339(Timestamp t);

// Accepts fractional seconds and Z or ±HH:MM offsets.
std::optional<Timestamp> parse_rfc3339(std::string_view text);

// RFC 5322 mail date, e.g. "Mon, 19 Oct 2026 10:00:00 +0000".
std::optional<Timestamp> parse_mail_date(std::string_view text);

}  // namespace biopay::util
