#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace biopay::ledger {

// Integer minor currency units (pence).
struct Pence {
  std::int64_t value = 0;

  constexpr Pence() = default;
  constexpr explicit Pence(std::int64_t v) : value(v) {}

  constexpr Pence& operator+=(Pence o) { value += o.value; return *this; }
  constexpr Pence& operator-=(Pence o) { value -= o.value; return *this; }
  friend constexpr Pence operator+(Pence a, Pence b) { return Pence(a.value + b.value); }
  friend constexpr Pence operator-(Pence a, Pence b) { return Pence(a.value - b.value); }
  friend constexpr Pence operator*(Pence a, std::int64_t k) { return Pence(a.value * k); }
  friend constexpr auto operator<=>(Pence, Pence) = default;
};

inline constexpr Pence kStartingCredit{10'000};

// "185.20": two decimals, no grouping, leading '-' for negatives.
std::string format_amount(Pence p);
// "£185.20".
std::string format_gbp(Pence p);
// Inverse of format_amount; also accepts a leading "£".
std::optional<Pence> parse_amount(std::string_view text);

}  // namespace biopay::ledger
