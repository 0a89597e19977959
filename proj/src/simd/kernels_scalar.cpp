#include "biopay/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace biopay::simd {
namespace {

void iou_one_to_many_scalar(double ax0, double ay0, double ax1, double ay1,
                            const BoxColumns& boxes, std::span<double> out) {
  const double area_a = (ax1 - ax0) * (ay1 - ay0);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double iw =
        std::max(0.0, std::min(ax1, boxes.x_max[i]) - std::max(ax0, boxes.x_min[i]));
    const double ih =
        std::max(0.0, std::min(ay1, boxes.y_max[i]) - std::max(ay0, boxes.y_min[i]));
    const double inter = iw * ih;
    const double area_b =
        (boxes.x_max[i] - boxes.x_min[i]) * (boxes.y_max[i] - boxes.y_min[i]);
    const double uni = area_a + area_b - inter;
    out[i] = uni > 0.0 ? inter / uni : 0.0;
  }
}

void relu_scalar(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::max(0.0, in[i]);
}

void adam_update_scalar(std::span<double> theta, std::span<double> m,
                        std::span<double> v, std::span<const double> grad,
                        const AdamCoefficients& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    const double mi = c.beta1 * m[i] + one_minus_b1 * g;
    const double vi = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = mi / c.bias_correction1;
    const double v_hat = vi / c.bias_correction2;
    m[i] = mi;
    v[i] = vi;
    theta[i] = theta[i] - (c.learning_rate * m_hat) / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar, &iou_one_to_many_scalar, &relu_scalar,
                                 &adam_update_scalar};
  return table;
}

}  // namespace biopay::simd
