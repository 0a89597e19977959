#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace biopay::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

// Structure-of-arrays view over a batch of corner-form boxes.
struct BoxColumns {
  std::span<const double> x_min;
  std::span<const double> y_min;
  std::span<const double> x_max;
  std::span<const double> y_max;

  std::size_t size() const { return x_min.size(); }
};

struct AdamCoefficients {
  double beta1;
  double beta2;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
  double learning_rate;
  double epsilon;
};

// One entry per instruction set. Every variant must produce results
// bit-identical to the scalar reference; the build disables FP contraction.
struct KernelTable {
  Isa isa;
  void (*iou_one_to_many)(double ax0, double ay0, double ax1, double ay1,
                          const BoxColumns& boxes, std::span<double> out);
  void (*relu)(std::span<const double> in, std::span<double> out);
  void (*adam_update)(std::span<double> theta, std::span<double> m,
                      std::span<double> v, std::span<const double> grad,
                      const AdamCoefficients& c);
};

const KernelTable& scalar_kernels();
// Null when the binary was built without AVX2 support.
const KernelTable* avx2_kernels();

bool cpu_supports(Isa isa);

// Chosen once per process: the widest supported ISA unless the
// BIOPAY_SIMD environment variable pins "scalar".
const KernelTable& active_kernels();

}  // namespace biopay::simd
