#include "biopay/loss/losses.hpp"

#include <algorithm>
#include <cmath>

#include "biopay/simd/kernels.hpp"

namespace biopay::loss {

ScalarGrad bce_objectness(double p, int p_star) {
  if (p_star != 0 && p_star != 1) throw LossError("bce_objectness: label must be 0 or 1");
  const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  if (p_star == 1) return {-std::log(q), -1.0 / q};
  return {-std::log1p(-q), 1.0 / (1.0 - q)};
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
  if (std::abs(x) < 1.0) return x;
  return x > 0.0 ? 1.0 : -1.0;
}

VectorGrad rpn_reg_loss(const Delta4& t, const Delta4& t_star) {
  VectorGrad out{0.0, std::vector<double>(4)};
  for (std::size_t i = 0; i < 4; ++i) {
    const double d = t[i] - t_star[i];
    out.value += smooth_l1(d);
    out.grad[i] = smooth_l1_grad(d);
  }
  return out;
}

VectorGrad softmax_ce(std::span<const double> logits, int u) {
  if (logits.empty()) throw LossError("softmax_ce: no logits");
  if (u < 0 || static_cast<std::size_t>(u) >= logits.size()) {
    throw LossError("softmax_ce: class index out of range");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> prob(logits.size());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    prob[j] = std::exp(logits[j] - top);
    z += prob[j];
  }
  const double log_z = std::log(z);
  const double value = log_z - (logits[static_cast<std::size_t>(u)] - top);
  for (auto& pj : prob) pj /= z;
  prob[static_cast<std::size_t>(u)] -= 1.0;
  return {std::max(0.0, value), std::move(prob)};
}

double fast_rcnn_loss(const FastRcnnInputs& in) {
  if (in.lambda < 0.0) throw LossError("fast_rcnn_loss: lambda must be non-negative");
  double loss = softmax_ce(in.logits, in.u).value;
  if (in.u >= 1 && in.lambda != 0.0) loss += in.lambda * rpn_reg_loss(in.t_u, in.v).value;
  return loss;
}

VectorGrad fast_rcnn_loss_grad(const FastRcnnInputs& in) {
  if (in.lambda < 0.0) throw LossError("fast_rcnn_loss: lambda must be non-negative");
  auto ce = softmax_ce(in.logits, in.u);
  VectorGrad out{ce.value, std::move(ce.grad)};
  out.grad.resize(in.logits.size() + 4, 0.0);
  if (in.u >= 1 && in.lambda != 0.0) {
    const auto reg = rpn_reg_loss(in.t_u, in.v);
    out.value += in.lambda * reg.value;
    for (std::size_t k = 0; k < 4; ++k) out.grad[in.logits.size() + k] = in.lambda * reg.grad[k];
  }
  return out;
}

double total_loss(const LossComponents& c, const LossWeights& weights) {
  for (double w : weights) {
    if (w < 0.0) throw LossError("total_loss: weights must be non-negative");
  }
  return weights[0] * c.rpn_cls + weights[1] * c.rpn_reg + weights[2] * c.box_cls +
         weights[3] * c.box_reg;
}

std::vector<double> relu(std::span<const double> x) {
  std::vector<double> out(x.size());
  simd::active_kernels().relu(x, out);
  return out;
}

}  // namespace biopay::loss
