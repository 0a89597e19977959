#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <vector>

#include "biopay/simd/kernels.hpp"

using namespace biopay::simd;

namespace {

const KernelTable* vector_table() {
  if (!cpu_supports(Isa::Avx2)) return nullptr;
  return avx2_kernels();
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Simd, ScalarTableIsComplete) {
  const auto& s = scalar_kernels();
  EXPECT_EQ(s.isa, Isa::Scalar);
  EXPECT_NE(s.iou_one_to_many, nullptr);
  EXPECT_NE(s.relu, nullptr);
  EXPECT_NE(s.adam_update, nullptr);
  EXPECT_FALSE(isa_name(active_kernels().isa).empty());
}

TEST(Simd, IouBitIdenticalAcrossLengths) {
  const auto* v = vector_table();
  if (!v) GTEST_SKIP() << "no AVX2 on this CPU";
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(0, 200), size(0, 80);
  for (std::size_t n = 0; n <= 67; ++n) {
    std::vector<double> x0(n), y0(n), x1(n), y1(n);
    for (std::size_t i = 0; i < n; ++i) {
      x0[i] = pos(rng);
      y0[i] = pos(rng);
      x1[i] = x0[i] + size(rng);
      y1[i] = y0[i] + size(rng);
    }
    if (n > 3) {  // zero-area and identical boxes
      x1[1] = x0[1];
      x0[2] = 10, y0[2] = 10, x1[2] = 50, y1[2] = 60;
    }
    const BoxColumns cols{x0, y0, x1, y1};
    std::vector<double> a(n), b(n);
    scalar_kernels().iou_one_to_many(10, 10, 50, 60, cols, a);
    v->iou_one_to_many(10, 10, 50, 60, cols, b);
    EXPECT_TRUE(bit_equal(a, b)) << "n=" << n;
    scalar_kernels().iou_one_to_many(5, 5, 5, 5, cols, a);
    v->iou_one_to_many(5, 5, 5, 5, cols, b);
    EXPECT_TRUE(bit_equal(a, b)) << "degenerate query, n=" << n;
  }
}

TEST(Simd, ReluBitIdentical) {
  const auto* v = vector_table();
  if (!v) GTEST_SKIP() << "no AVX2 on this CPU";
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (std::size_t n = 0; n <= 37; ++n) {
    std::vector<double> in(n), a(n), b(n);
    for (auto& x : in) x = g(rng);
    if (n > 2) in[1] = -0.0;
    scalar_kernels().relu(in, a);
    v->relu(in, b);
    EXPECT_TRUE(bit_equal(a, b)) << "n=" << n;
  }
}

TEST(Simd, AdamBitIdentical) {
  const auto* v = vector_table();
  if (!v) GTEST_SKIP() << "no AVX2 on this CPU";
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (std::size_t n = 0; n <= 29; ++n) {
    std::vector<double> th(n), m(n), vv(n), grad(n);
    for (std::size_t i = 0; i < n; ++i) {
      th[i] = g(rng);
      m[i] = g(rng) * 0.1;
      vv[i] = std::abs(g(rng)) * 0.01;
      grad[i] = g(rng);
    }
    auto th2 = th, m2 = m, v2 = vv;
    const AdamCoefficients c{0.9, 0.999, 1 - 0.9 * 0.9 * 0.9, 1 - 0.999 * 0.999 * 0.999, 1e-3, 1e-8};
    scalar_kernels().adam_update(th, m, vv, grad, c);
    v->adam_update(th2, m2, v2, grad, c);
    EXPECT_TRUE(bit_equal(th, th2)) << "n=" << n;
    EXPECT_TRUE(bit_equal(m, m2));
    EXPECT_TRUE(bit_equal(vv, v2));
  }
}
