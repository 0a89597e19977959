#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fixture {

struct PaymentLine {
  const char* species;
  std::uint64_t detections;
  const char* gbp;
};

// Guardian payments from the ten-month trial, transcribed as printed
// ("9,98" read as 9.98).
inline const std::vector<PaymentLine>& trial_payments() {
  static const std::vector<PaymentLine> rows{
      {"Canis mesomelas", 34, "0.34"},          {"Hystrix cristata", 37, "0.37"},
      {"Crocuta crocuta", 58, "0.58"},          {"Loxodonta africana", 148, "1.48"},
      {"Acinonyx jubatus", 222, "2.22"},        {"Papio sp", 748, "7.48"},
      {"Rhinocerotidae", 998, "9.98"},          {"Connochaetes taurinus", 1022, "10.22"},
      {"Tragelaphus oryx", 1058, "10.58"},      {"Giraffa camelopardalis", 2646, "26.46"},
      {"Panthera leo", 4391, "43.91"},          {"Equus quagga", 7158, "71.58"},
  };
  return rows;
}

inline constexpr std::uint64_t kTrialTotalDetections = 18520;
inline constexpr const char* kTrialTotalGbp = "185.20";
inline constexpr const char* kGuardianFinalGbp = "285.20";

inline std::vector<std::pair<std::string, std::uint64_t>> trial_counts() {
  std::vector<std::pair<std::string, std::uint64_t>> out;
  for (const auto& r : trial_payments()) out.emplace_back(r.species, r.detections);
  return out;
}

inline std::vector<std::string> trial_species() {
  std::vector<std::string> out;
  for (const auto& r : trial_payments()) out.emplace_back(r.species);
  return out;
}

}  // namespace fixture
