#include "biopay/ledger/money.hpp"

#include <cctype>
#include <cstdlib>

namespace biopay::ledger {

std::string format_amount(Pence p) {
  const bool negative = p.value < 0;
  const std::uint64_t mag = negative ? 0 - static_cast<std::uint64_t>(p.value)
                                     : static_cast<std::uint64_t>(p.value);
  std::string frac = std::to_string(mag % 100);
  if (frac.size() < 2) frac.insert(0, "0");
  return (negative ? "-" : "") + std::to_string(mag / 100) + "." + frac;
}

std::string format_gbp(Pence p) { return "£" + format_amount(p); }

std::optional<Pence> parse_amount(std::string_view s) {
  constexpr std::string_view kPound = "£";
  if (s.starts_with(kPound)) s.remove_prefix(kPound.size());
  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.remove_prefix(1);
  }
  const auto dot = s.find('.');
  if (dot == std::string_view::npos || dot == 0 || s.size() - dot != 3) return std::nullopt;
  std::int64_t whole = 0;
  for (std::size_t i = 0; i < dot; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    whole = whole * 10 + (s[i] - '0');
  }
  if (!std::isdigit(static_cast<unsigned char>(s[dot + 1])) ||
      !std::isdigit(static_cast<unsigned char>(s[dot + 2]))) {
    return std::nullopt;
  }
  const std::int64_t cents = (s[dot + 1] - '0') * 10 + (s[dot + 2] - '0');
  const std::int64_t total = whole * 100 + cents;
  return Pence(negative ? -total : total);
}

}  // namespace biopay::ledger
