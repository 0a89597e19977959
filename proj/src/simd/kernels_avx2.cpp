#include "biopay/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

#include <algorithm>
#include <cmath>

#define BIOPAY_AVX2 __attribute__((target("avx2")))

namespace biopay::simd {
namespace {

BIOPAY_AVX2 void iou_one_to_many_avx2(double ax0, double ay0, double ax1, double ay1,
                                      const BoxColumns& boxes, std::span<double> out) {
  const double area_a = (ax1 - ax0) * (ay1 - ay0);
  const __m256d vax0 = _mm256_set1_pd(ax0);
  const __m256d vay0 = _mm256_set1_pd(ay0);
  const __m256d vax1 = _mm256_set1_pd(ax1);
  const __m256d vay1 = _mm256_set1_pd(ay1);
  const __m256d varea_a = _mm256_set1_pd(area_a);
  const __m256d zero = _mm256_setzero_pd();

  const std::size_t n = boxes.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d bx0 = _mm256_loadu_pd(boxes.x_min.data() + i);
    const __m256d by0 = _mm256_loadu_pd(boxes.y_min.data() + i);
    const __m256d bx1 = _mm256_loadu_pd(boxes.x_max.data() + i);
    const __m256d by1 = _mm256_loadu_pd(boxes.y_max.data() + i);
    // Operand order mirrors std::max(0, x): the scalar path returns 0 for NaN.
    const __m256d iw = _mm256_max_pd(
        _mm256_sub_pd(_mm256_min_pd(bx1, vax1), _mm256_max_pd(bx0, vax0)), zero);
    const __m256d ih = _mm256_max_pd(
        _mm256_sub_pd(_mm256_min_pd(by1, vay1), _mm256_max_pd(by0, vay0)), zero);
    const __m256d inter = _mm256_mul_pd(iw, ih);
    const __m256d area_b =
        _mm256_mul_pd(_mm256_sub_pd(bx1, bx0), _mm256_sub_pd(by1, by0));
    const __m256d uni = _mm256_sub_pd(_mm256_add_pd(varea_a, area_b), inter);
    const __m256d positive = _mm256_cmp_pd(uni, zero, _CMP_GT_OQ);
    const __m256d ratio = _mm256_div_pd(inter, uni);
    _mm256_storeu_pd(out.data() + i, _mm256_and_pd(ratio, positive));
  }
  for (; i < n; ++i) {
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

BIOPAY_AVX2 void relu_avx2(std::span<const double> in, std::span<double> out) {
  const __m256d zero = _mm256_setzero_pd();
  const std::size_t n = in.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out.data() + i, _mm256_max_pd(_mm256_loadu_pd(in.data() + i), zero));
  }
  for (; i < n; ++i) out[i] = std::max(0.0, in[i]);
}

BIOPAY_AVX2 void adam_update_avx2(std::span<double> theta, std::span<double> m,
                                  std::span<double> v, std::span<const double> grad,
                                  const AdamCoefficients& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(one_minus_b1);
  const __m256d omb2 = _mm256_set1_pd(one_minus_b2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.learning_rate);
  const __m256d eps = _mm256_set1_pd(c.epsilon);

  const std::size_t n = theta.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad.data() + i);
    const __m256d mi =
        _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m.data() + i)), _mm256_mul_pd(omb1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v.data() + i)),
                                     _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(m.data() + i, mi);
    _mm256_storeu_pd(v.data() + i, vi);
    _mm256_storeu_pd(theta.data() + i, _mm256_sub_pd(_mm256_loadu_pd(theta.data() + i), step));
  }
  for (; i < n; ++i) {
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

const KernelTable* avx2_kernels() {
  static const KernelTable table{Isa::Avx2, &iou_one_to_many_avx2, &relu_avx2,
                                 &adam_update_avx2};
  return &table;
}

}  // namespace biopay::simd

#else

namespace biopay::simd {
const KernelTable* avx2_kernels() { return nullptr; }
}  // namespace biopay::simd

#endif
