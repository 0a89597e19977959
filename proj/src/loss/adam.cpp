#include "biopay/loss/adam.hpp"

#include <cmath>

#include "biopay/loss/losses.hpp"
#include "biopay/simd/kernels.hpp"

namespace biopay::loss {

AdamState AdamState::fresh(std::vector<double> theta, double eta, double beta1, double beta2,
                           double epsilon) {
  AdamState s;
  s.m.assign(theta.size(), 0.0);
  s.v.assign(theta.size(), 0.0);
  s.theta = std::move(theta);
  s.eta = eta;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

AdamState adam_step(const AdamState& state, std::span<const double> grad) {
  if (grad.size() != state.theta.size() || state.m.size() != state.theta.size() ||
      state.v.size() != state.theta.size()) {
    throw LossError("adam_step: gradient and state lengths differ");
  }
  if (!(state.beta1 >= 0.0 && state.beta1 < 1.0) || !(state.beta2 >= 0.0 && state.beta2 < 1.0)) {
    throw LossError("adam_step: decay rates must lie in [0, 1)");
  }
  if (!(state.eta > 0.0) || !(state.epsilon > 0.0)) {
    throw LossError("adam_step: learning rate and epsilon must be positive");
  }

  AdamState next = state;
  next.t = state.t + 1;
  const auto t = static_cast<double>(next.t);
  const simd::AdamCoefficients coeffs{state.beta1,
                                      state.beta2,
                                      1.0 - std::pow(state.beta1, t),
                                      1.0 - std::pow(state.beta2, t),
                                      state.eta,
                                      state.epsilon};
  simd::active_kernels().adam_update(next.theta, next.m, next.v, grad, coeffs);
  return next;
}

}  // namespace biopay::loss
