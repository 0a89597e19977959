#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace biopay::loss {

struct AdamState {
  std::vector<double> theta;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eta = 0.001;
  double epsilon = 1e-8;

  // Zero moments around the given parameters.
  static AdamState fresh(std::vector<double> theta, double eta = 0.001, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8);

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One Adam step. The step count advances before bias correction, so the
// first call divides by (1 − β1) and (1 − β2). The input is not modified.
AdamState adam_step(const AdamState& state, std::span<const double> grad);

}  // namespace biopay::loss
